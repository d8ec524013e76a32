//! Single-particle diagnostics: orthogonality index, mean inverse
//! participation ratio, transfer-matrix localization lengths, density of
//! states and the asymptotic-envelope estimate of the MIPR.
//!
//! Open chains with `|γ| < |J|` are diagonalized through the Hermitian
//! partner `H' = S⁻¹HS`. Its eigenvectors are rebuilt from their eigenvalues
//! by the three-term recurrence, run from each chain end toward the peak (the
//! growing direction) and kept as logarithms, so the exponentially small
//! tails survive the multiplication by `S` that turns them into right
//! eigenvectors of `H`.

use ndarray::{Array2, ShapeBuilder};
use ndarray_linalg::{Determinant, Eig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigh;
use crate::model::{
    build_hamiltonian, realization_seed, sample_disorder, sample_onsite, similarity_transform, Boundary,
    DisorderRealization, Hamiltonian, ModelParams, C64,
};
use crate::parallel::{map_indexed, Execution};
use crate::stats::{Estimate, Running};

/// Right eigenvectors of `H`, columns of unit Euclidean norm.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub eigenvalues: Vec<C64>,
    pub vectors: Array2<C64>,
    /// `|U_xn|²`, accurate to full relative precision on the similarity route.
    pub densities: Array2<f64>,
    /// `ln |det U| / L` from the similarity route, where it is exact.
    log_orthogonality: Option<f64>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Runs `ψ_next = ((e - m_x)/t) ψ_x - ψ_prev` over `(x, next)` pairs from
/// `start`, with `ψ` zero beyond the boundary, rescaling as it goes.
fn sweep(
    m: &[f64],
    t: f64,
    e: f64,
    sites: impl Iterator<Item = (usize, usize)>,
    start: usize,
    log_abs: &mut [f64],
    sign: &mut [f64],
) {
    let (mut prev, mut cur, mut scale) = (0.0f64, 1.0f64, 0.0f64);
    log_abs[start] = 0.0;
    sign[start] = 1.0;
    for (x, next) in sites {
        let nv = ((e - m[x]) / t) * cur - prev;
        prev = cur;
        cur = nv;
        let big = cur.abs().max(prev.abs());
        if big > 1e100 || (big < 1e-100 && big > 0.0) {
            prev /= big;
            cur /= big;
            scale += big.ln();
        }
        log_abs[next] = cur.abs().ln() + scale;
        sign[next] = cur.signum();
    }
}

/// Eigenvector of the tridiagonal `H'` (diagonal `m`, hopping `t`) at
/// eigenvalue `e`, as `(ln |ψ_x|, sign ψ_x)`, matched at site `k`.
fn recurrence_eigenvector(m: &[f64], t: f64, e: f64, k: usize) -> (Vec<f64>, Vec<f64>) {
    let l = m.len();
    let mut log_abs = vec![0.0; l];
    let mut sign = vec![1.0; l];

    sweep(m, t, e, (0..k).map(|x| (x, x + 1)), 0, &mut log_abs, &mut sign);
    let (left_k, left_sign) = (log_abs[k], sign[k]);
    sweep(
        m,
        t,
        e,
        (k + 1..l).rev().map(|x| (x, x - 1)),
        l - 1,
        &mut log_abs,
        &mut sign,
    );
    let (shift, flip) = (left_k - log_abs[k], left_sign * sign[k]);
    for x in k..l {
        log_abs[x] += shift;
        sign[x] *= flip;
    }
    log_abs[k] = left_k;
    sign[k] = left_sign;
    let norm = 0.5 * log_sum_exp(log_abs.iter().map(|v| 2.0 * v));
    log_abs.iter_mut().for_each(|v| *v -= norm);
    (log_abs, sign)
}

fn similarity_route(h: &Hamiltonian) -> Result<EigenSystem> {
    let params = &h.params;
    let l = params.l;
    let sim = similarity_transform(params)?;
    let t = -sim.j_prime / 2.0;
    let m: Vec<f64> = (0..l).map(|i| h.matrix[[i, i]].re).collect();
    let hp = Array2::from_shape_fn((l, l), |(i, j)| {
        if i == j {
            m[i]
        } else if i.abs_diff(j) == 1 {
            t
        } else {
            0.0
        }
    });
    let (vals, vecs) = symmetric_eigh(&hp)?;

    let log_s: Vec<f64> = (0..l).map(|x| sim.log_scale(x)).collect();
    let mut vectors = Array2::<C64>::zeros((l, l).f());
    let mut densities = Array2::<f64>::zeros((l, l).f());
    let mut sum_log_norms = 0.0;
    for n in 0..l {
        let col = vecs.column(n);
        let k = (0..l)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
            .unwrap_or(0);
        let (log_u, sign) = recurrence_eigenvector(&m, t, vals[n], k);
        let log_su: Vec<f64> = (0..l).map(|x| log_u[x] + log_s[x]).collect();
        let log_norm = 0.5 * log_sum_exp(log_su.iter().map(|v| 2.0 * v));
        sum_log_norms += log_norm;
        for x in 0..l {
            let a = (log_su[x] - log_norm).exp();
            vectors[[x, n]] = C64::new(sign[x] * a, 0.0);
            densities[[x, n]] = (2.0 * (log_su[x] - log_norm)).exp();
        }
    }
    // |det U| = |det S| |det U'| / Π ‖S u'_n‖ with |det U'| = 1.
    let log_o = (log_s.iter().sum::<f64>() - sum_log_norms) / l as f64;
    Ok(EigenSystem {
        eigenvalues: vals.iter().map(|&e| C64::new(e, 0.0)).collect(),
        vectors,
        densities,
        log_orthogonality: Some(log_o),
    })
}

fn general_route(h: &Hamiltonian) -> Result<EigenSystem> {
    let (vals, mut vecs) = h.matrix.eig()?;
    for mut col in vecs.columns_mut() {
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            col.mapv_inplace(|z| z / n);
        }
    }
    let densities = vecs.mapv(|z| z.norm_sqr());
    Ok(EigenSystem {
        eigenvalues: vals.to_vec(),
        vectors: vecs,
        densities,
        log_orthogonality: None,
    })
}

/// Eigenvalues and unit right eigenvectors of `H`.
pub fn eigen_system(h: &Hamiltonian) -> Result<EigenSystem> {
    let p = &h.params;
    if p.boundary == Boundary::Open && p.gamma.abs() < p.j.abs() {
        similarity_route(h)
    } else {
        general_route(h)
    }
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn orthogonality(&self) -> Result<f64> {
        match self.log_orthogonality {
            Some(v) => Ok(v.exp()),
            None => orthogonality_index(&self.vectors),
        }
    }

    pub fn mipr(&self) -> f64 {
        mipr_from_densities(&self.densities)
    }
}

/// `|det U|^{1/L}` from an LU factorization, in the log domain.
pub fn orthogonality_index(u: &Array2<C64>) -> Result<f64> {
    let l = u.nrows();
    if l != u.ncols() {
        return Err(Error::DimensionMismatch {
            expected: l,
            found: u.ncols(),
        });
    }
    let (_, ln_det) = u.sln_det()?;
    if ln_det == f64::NEG_INFINITY || ln_det.is_nan() {
        return Ok(0.0);
    }
    Ok((ln_det / l as f64).exp())
}

fn mipr_from_densities(p: &Array2<f64>) -> f64 {
    let l = p.ncols();
    p.columns()
        .into_iter()
        .map(|c| {
            let s: f64 = c.sum();
            c.iter().map(|v| v * v).sum::<f64>() / (s * s)
        })
        .sum::<f64>()
        / l as f64
}

/// Mean over columns of `Σ_x |U_xn|⁴`.
pub fn mipr(u: &Array2<C64>) -> f64 {
    mipr_from_densities(&u.mapv(|z| z.norm_sqr()))
}

/// Lyapunov exponent of the Hermitian partner chain at one energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationLength {
    pub energy: f64,
    /// Amplitude decay length `1/λ`.
    pub xi: f64,
    pub xi_err: f64,
    pub lambda: f64,
    pub lambda_err: f64,
    /// Jackknife error within 20% of `λ`.
    pub converged: bool,
    /// `ξ` exceeds a tenth of the chain walked.
    pub extended: bool,
}

const JACKKNIFE_SEGMENTS: usize = 16;

/// Transfer-matrix estimate for `ψ_{x+1} + ψ_{x-1} = ((E - m_x)/t) ψ_x`
/// with `t = -J'/2`, the hopping of `H'`, and `m_x` uniform on `[-W/2, W/2]`.
pub fn localization_length(energy: f64, w: f64, j_prime: f64, n_sites: usize, seed: u64) -> Result<LocalizationLength> {
    if j_prime == 0.0 || !j_prime.is_finite() {
        return Err(Error::Domain(format!("need a finite nonzero J', got {j_prime}")));
    }
    if n_sites < 10 * JACKKNIFE_SEGMENTS {
        return Err(Error::InvalidParameter(format!("n_sites = {n_sites} is too short")));
    }
    let t = -j_prime / 2.0;
    let burn_in = (n_sites / 10).min(1000);
    let m = sample_onsite(w, burn_in + n_sites, seed);

    let (mut prev, mut cur) = (0.0f64, 1.0f64);
    let mut growth = [0.0; JACKKNIFE_SEGMENTS];
    let mut counts = [0usize; JACKKNIFE_SEGMENTS];
    for (x, &mx) in m.iter().enumerate() {
        let next = ((energy - mx) / t) * cur - prev;
        prev = cur;
        cur = next;
        let norm = (cur * cur + prev * prev).sqrt();
        prev /= norm;
        cur /= norm;
        if x >= burn_in {
            let seg = (x - burn_in) * JACKKNIFE_SEGMENTS / n_sites;
            growth[seg] += norm.ln();
            counts[seg] += 1;
        }
    }
    let total: f64 = growth.iter().sum();
    let lambda = (total / n_sites as f64).max(0.0);
    let k = JACKKNIFE_SEGMENTS as f64;
    let leave_out: Vec<f64> = (0..JACKKNIFE_SEGMENTS)
        .map(|s| (total - growth[s]) / (n_sites - counts[s]) as f64)
        .collect();
    let lo_mean = leave_out.iter().sum::<f64>() / k;
    let lambda_err = ((k - 1.0) / k * leave_out.iter().map(|v| (v - lo_mean).powi(2)).sum::<f64>()).sqrt();
    let xi = if lambda > 0.0 { 1.0 / lambda } else { f64::INFINITY };
    Ok(LocalizationLength {
        energy,
        xi,
        xi_err: if lambda > 0.0 {
            lambda_err / (lambda * lambda)
        } else {
            f64::INFINITY
        },
        lambda,
        lambda_err,
        converged: lambda_err <= 0.2 * lambda,
        extended: xi > n_sites as f64 / 10.0,
    })
}

/// Decay length read directly off eigenstates of the Hermitian chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub xi: f64,
    /// Standard error of the fitted slope, propagated to `ξ`.
    pub xi_err: f64,
    pub states: usize,
}

/// Fits `⟨ln|u(x₀ ± d)|⟩ = a - d/ξ` over `d ∈ [2, max_distance]`, averaging
/// over eigenstates of the chain with hopping `-J'/2` whose energies lie
/// within `window` of `energy` and whose peak `x₀` is at least
/// `max_distance` from both ends. Distances where the average falls below
/// `1e-10` of the peak are dropped: dense eigenvectors carry absolute errors
/// near machine precision there.
pub fn envelope_localization_length(
    w: f64,
    j_prime: f64,
    n_sites: usize,
    energy: f64,
    window: f64,
    max_distance: usize,
    seed: u64,
) -> Result<EnvelopeFit> {
    if n_sites < 2 * max_distance + 1 || max_distance < 4 {
        return Err(Error::InvalidParameter(format!(
            "need n_sites > 2 max_distance and max_distance >= 4, got {n_sites} and {max_distance}"
        )));
    }
    let t = -j_prime / 2.0;
    let m = sample_onsite(w, n_sites, seed);
    let mut hp = Array2::<f64>::zeros((n_sites, n_sites));
    for i in 0..n_sites {
        hp[[i, i]] = m[i];
        if i + 1 < n_sites {
            hp[[i, i + 1]] = t;
            hp[[i + 1, i]] = t;
        }
    }
    let (vals, vecs) = symmetric_eigh(&hp)?;
    let mut profile = vec![Running::default(); max_distance + 1];
    let mut states = 0;
    for (n, &e) in vals.iter().enumerate() {
        if (e - energy).abs() > window {
            continue;
        }
        let col = vecs.column(n);
        let x0 = (0..n_sites)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
            .unwrap_or(0);
        if x0 < max_distance || x0 + max_distance >= n_sites {
            continue;
        }
        let peak = col[x0].abs().ln();
        for (d, row) in profile.iter_mut().enumerate().take(max_distance + 1).skip(1) {
            for x in [x0 - d, x0 + d] {
                row.push(col[x].abs().max(f64::MIN_POSITIVE).ln() - peak);
            }
        }
        states += 1;
    }
    let floor = 1e-10f64.ln();
    let pts: Vec<(f64, f64)> = (2..=max_distance)
        .filter(|&d| profile[d].count() > 0 && profile[d].mean() > floor)
        .map(|d| (d as f64, profile[d].mean()))
        .collect();
    let fit = crate::stats::linear_fit(&pts)
        .ok_or_else(|| Error::Domain(format!("{states} states in the window left too few usable distances")))?;
    if fit.slope >= 0.0 {
        return Err(Error::Domain("eigenstate envelopes do not decay".into()));
    }
    Ok(EnvelopeFit {
        xi: -1.0 / fit.slope,
        xi_err: fit.slope_err / (fit.slope * fit.slope),
        states,
    })
}

/// Normalized histogram of real eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    /// Integrates to one over `[lo, hi]`.
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn from_samples(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::InvalidParameter(format!(
                "histogram needs bins > 0 and hi > lo, got {bins} bins on [{lo}, {hi}]"
            )));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &s in samples {
            if !(lo..=hi).contains(&s) {
                return Err(Error::Domain(format!("sample {s} outside [{lo}, {hi}]")));
            }
            let b = (((s - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let total = samples.len().max(1) as f64;
        let density = counts.iter().map(|&c| c as f64 / (total * width)).collect();
        Ok(Histogram {
            lo,
            hi,
            counts,
            density,
        })
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.counts.len()).map(|b| self.lo + (b as f64 + 0.5) * w).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }
}

/// Shared knobs for disorder-averaged diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    pub realizations: usize,
    pub bins: usize,
    pub n_sites: usize,
    pub base_seed: u64,
    pub execution: Execution,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            realizations: 50,
            bins: 101,
            n_sites: 100_000,
            base_seed: 0,
            execution: Execution::Parallel,
        }
    }
}

fn hermitian_spectrum(params: &ModelParams, dis: &DisorderRealization) -> Result<Vec<f64>> {
    let sim = similarity_transform(params)?;
    let l = params.l;
    let t = -sim.j_prime / 2.0;
    let mut hp = Array2::<f64>::zeros((l, l));
    for i in 0..l {
        hp[[i, i]] = dis.onsite[i];
        if i + 1 < l {
            hp[[i, i + 1]] = t;
            hp[[i + 1, i]] = t;
        }
    }
    if params.boundary == Boundary::Periodic {
        hp[[0, l - 1]] = t;
        hp[[l - 1, 0]] = t;
    }
    Ok(symmetric_eigh(&hp)?.0.to_vec())
}

/// Histogram of the eigenvalues of `H'` pooled over realizations, on
/// `[-(|J'| + W/2), |J'| + W/2]`.
pub fn density_of_states(params: &ModelParams, opts: &SpectralOptions) -> Result<Histogram> {
    let sim = similarity_transform(params)?;
    let spectra = map_indexed(opts.realizations, opts.execution, |r| {
        let seed = realization_seed(opts.base_seed, params.l, params.w, params.gamma, r as u64);
        hermitian_spectrum(params, &sample_disorder(params, seed))
    });
    let mut all = Vec::with_capacity(opts.realizations * params.l);
    for s in spectra {
        all.extend(s?);
    }
    let edge = sim.j_prime.abs() + params.w / 2.0;
    Histogram::from_samples(&all, -edge, edge, opts.bins)
}

/// Log of `Σ_{d=a}^{b} e^{c d}`, `-∞` for an empty range.
fn log_geometric(c: f64, a: i64, b: i64) -> f64 {
    if a > b {
        return f64::NEG_INFINITY;
    }
    let n = (b - a + 1) as f64;
    if c == 0.0 {
        return n.ln();
    }
    if c == f64::NEG_INFINITY {
        return if a == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    // Factor out the largest term so every remaining exponent is ≤ 0.
    let (lead, k) = if c > 0.0 { (c * b as f64, -c) } else { (c * a as f64, c) };
    lead + (-(k * n).exp_m1()).ln() - (-k.exp_m1()).ln()
}

/// IPR of `p(x) ∝ r^x e^{-|x - x_n|/ξ}` on sites `x = 0..L-1`.
pub fn asymptotic_ipr(r: f64, xi: f64, x_n: usize, l: usize) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) || !(xi > 0.0) || x_n >= l {
        return Err(Error::InvalidParameter(format!(
            "need r > 0, xi > 0 and x_n < L, got r = {r}, xi = {xi}, x_n = {x_n}, L = {l}"
        )));
    }
    let (ln_r, inv) = (r.ln(), 1.0 / xi);
    let (lo, hi) = (-(x_n as i64), (l - 1 - x_n) as i64);
    // d = x - x_n; left part d ≤ 0, right part d ≥ 1.
    let c_left = if inv.is_finite() { ln_r + inv } else { f64::INFINITY };
    let c_right = if inv.is_finite() { ln_r - inv } else { f64::NEG_INFINITY };
    let sum = |scale: f64| -> f64 {
        let left = if c_left.is_infinite() {
            0.0
        } else {
            log_geometric(scale * c_left, lo, 0)
        };
        let right = log_geometric(scale * c_right, 1, hi);
        log_sum_exp([left, right].into_iter())
    };
    Ok((sum(2.0) - 2.0 * sum(1.0)).exp())
}

/// DOS-weighted asymptotic IPR with `ξ(E)` from the transfer matrix at the
/// histogram bin centers and the envelope centered at `x_n = L/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticMipr {
    pub value: f64,
    pub dos: Histogram,
    pub lengths: Vec<LocalizationLength>,
    /// Occupied bins whose `λ` did not converge.
    pub flagged: usize,
}

pub fn asymptotic_mipr(params: &ModelParams, opts: &SpectralOptions) -> Result<AsymptoticMipr> {
    let sim = similarity_transform(params)?;
    let dos = density_of_states(params, opts)?;
    let centers = dos.centers();
    let occupied: Vec<usize> = (0..centers.len()).filter(|&b| dos.counts[b] > 0).collect();
    let lengths = map_indexed(occupied.len(), opts.execution, |i| {
        let b = occupied[i];
        let seed = crate::model::mix_seed(&[opts.base_seed, params.w.to_bits(), b as u64, 0x7a11]);
        localization_length(centers[b], params.w, sim.j_prime, opts.n_sites, seed)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let (mut num, mut den, mut flagged) = (0.0, 0.0, 0);
    for (&b, ll) in occupied.iter().zip(&lengths) {
        if !ll.converged && !ll.extended {
            flagged += 1;
        }
        // |u|² decays at twice the amplitude rate.
        let xi_density = ll.xi / 2.0;
        let ipr = if xi_density.is_finite() {
            asymptotic_ipr(sim.r, xi_density, params.l / 2, params.l)?
        } else {
            asymptotic_ipr(sim.r, f64::MAX, params.l / 2, params.l)?
        };
        num += dos.density[b] * ipr;
        den += dos.density[b];
    }
    if flagged > 0 {
        log::warn!(
            "{flagged} energy bins with unconverged Lyapunov exponents at W = {}",
            params.w
        );
    }
    Ok(AsymptoticMipr {
        value: num / den,
        dos,
        lengths,
        flagged,
    })
}

/// Disorder-averaged orthogonality index and MIPR at one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRecord {
    pub gamma: f64,
    pub w: f64,
    pub l: usize,
    pub boundary: Boundary,
    pub realizations: usize,
    pub orthogonality: Estimate,
    pub mipr: Estimate,
    pub asymptotic_mipr: Option<f64>,
}

pub fn spectral_point(params: &ModelParams, opts: &SpectralOptions, with_asymptotic: bool) -> Result<SpectralRecord> {
    params.validate()?;
    let per = map_indexed(opts.realizations, opts.execution, |r| -> Result<(f64, f64)> {
        let seed = realization_seed(opts.base_seed, params.l, params.w, params.gamma, r as u64);
        let h = build_hamiltonian(params, &sample_disorder(params, seed))?;
        let es = eigen_system(&h)?;
        Ok((es.orthogonality()?, es.mipr()))
    });
    let (mut o, mut m) = (Running::default(), Running::default());
    for v in per {
        let (ov, mv) = v?;
        o.push(ov);
        m.push(mv);
    }
    let asymptotic = if with_asymptotic {
        Some(asymptotic_mipr(params, opts)?.value)
    } else {
        None
    };
    Ok(SpectralRecord {
        gamma: params.gamma,
        w: params.w,
        l: params.l,
        boundary: params.boundary,
        realizations: opts.realizations,
        orthogonality: o.summary(),
        mipr: m.summary(),
        asymptotic_mipr: asymptotic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn instance(gamma: f64, w: f64, l: usize, seed: u64) -> Hamiltonian {
        let p = ModelParams::new(1.0, gamma, w, l, Boundary::Open).unwrap();
        build_hamiltonian(&p, &sample_disorder(&p, seed)).unwrap()
    }

    fn residual(h: &Hamiltonian, es: &EigenSystem) -> f64 {
        let mut worst: f64 = 0.0;
        for (n, e) in es.eigenvalues.iter().enumerate() {
            let u = es.vectors.column(n);
            let r = h.matrix.dot(&u) - u.mapv(|z| z * e);
            worst = worst.max(r.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        worst
    }

    #[test]
    fn similarity_route_gives_true_eigenvectors() {
        for (gamma, w) in [(-0.5, 2.0), (0.3, 4.0), (0.0, 1.0), (-0.5, 8.0)] {
            let h = instance(gamma, w, 24, 5);
            let es = eigen_system(&h).unwrap();
            let norm = h.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(residual(&h, &es) < 1e-8 * norm * 3.0, "gamma {gamma}, W {w}");
            for c in es.vectors.columns() {
                let n: f64 = c.iter().map(|z| z.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recurrence_tails_beat_the_eigensolver_floor() {
        // Deep Anderson localization: far tails are far below 1e-16 and must
        // still satisfy the eigen-equation to full relative precision.
        let h = instance(0.0, 10.0, 200, 2);
        let l = 200;
        let m: Vec<f64> = (0..l).map(|i| h.matrix[[i, i]].re).collect();
        let hp = h.matrix.mapv(|z| z.re);
        let (vals, vecs) = symmetric_eigh(&hp).unwrap();
        let n = 100;
        let k = (0..l)
            .max_by(|&a, &b| vecs[[a, n]].abs().total_cmp(&vecs[[b, n]].abs()))
            .unwrap();
        let (log_u, sign) = recurrence_eigenvector(&m, -0.5, vals[n], k);
        assert!(log_u.iter().cloned().fold(f64::INFINITY, f64::min) < -100.0);
        for x in 1..l - 1 {
            if x.abs_diff(k) < 2 {
                continue;
            }
            // Relative residual of row x, normalized by the largest term.
            let u = |y: usize| sign[y] * (log_u[y] - log_u[x]).exp();
            let res = -0.5 * (u(x - 1) + u(x + 1)) + (m[x] - vals[n]) * u(x);
            let scale = u(x - 1).abs().max(u(x + 1).abs()).max(1.0);
            assert!(res.abs() < 1e-8 * scale, "x {x}: {res}");
        }
        for x in 0..l {
            if vecs[[x, n]].abs() > 1e-6 {
                assert!((log_u[x] - vecs[[x, n]].abs().ln()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn closed_form_orthogonality_matches_lu() {
        for (gamma, w, seed) in [(-0.5, 1.0, 1), (-0.5, 5.0, 2), (0.4, 3.0, 3), (-0.2, 0.0, 4)] {
            let h = instance(gamma, w, 20, seed);
            let es = eigen_system(&h).unwrap();
            let via_lu = orthogonality_index(&es.vectors).unwrap();
            let closed = es.orthogonality().unwrap();
            assert!(
                (via_lu - closed).abs() < 1e-8 * closed.max(1e-3),
                "{via_lu} vs {closed}"
            );
        }
    }

    #[test]
    fn similarity_and_general_routes_agree_on_small_chains() {
        let h = instance(-0.5, 3.0, 16, 9);
        let a = eigen_system(&h).unwrap();
        let b = general_route(&h).unwrap();
        assert!((a.mipr() - mipr(&b.vectors)).abs() < 1e-8);
        assert!((a.orthogonality().unwrap() - b.orthogonality().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn hermitian_eigenbasis_is_orthogonal() {
        for w in [0.0, 2.0, 7.0] {
            let es = eigen_system(&instance(0.0, w, 32, 3)).unwrap();
            assert!((es.orthogonality().unwrap() - 1.0).abs() < 1e-8);
            assert!((orthogonality_index(&es.vectors).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn clean_skin_chain_is_nearly_degenerate() {
        let es = eigen_system(&instance(-0.5, 0.0, 128, 0)).unwrap();
        assert!(es.orthogonality().unwrap() < 0.05);
    }

    #[test]
    fn periodic_chain_uses_the_general_solver() {
        let p = ModelParams::new(1.0, -0.5, 1.0, 12, Boundary::Periodic).unwrap();
        let h = build_hamiltonian(&p, &sample_disorder(&p, 4)).unwrap();
        let es = eigen_system(&h).unwrap();
        assert!(es.log_orthogonality.is_none());
        assert!(residual(&h, &es) < 1e-10);
    }

    #[test]
    fn mipr_limits() {
        let l = 8;
        let eye = Array2::<C64>::eye(l);
        assert!((mipr(&eye) - 1.0).abs() < 1e-15);
        let plane = Array2::from_shape_fn((l, l), |(x, n)| {
            C64::from_polar(
                1.0 / (l as f64).sqrt(),
                2.0 * std::f64::consts::PI * (x * n) as f64 / l as f64,
            )
        });
        assert!((mipr(&plane) - 1.0 / l as f64).abs() < 1e-14);
        assert_eq!(orthogonality_index(&Array2::<C64>::zeros((3, 3))).unwrap(), 0.0);
    }

    #[test]
    fn clean_out_of_band_decay() {
        let jp = 0.75f64.sqrt();
        for e in [1.0, 1.3, 2.0] {
            let ll = localization_length(e, 0.0, jp, 20_000, 1).unwrap();
            let want = 1.0 / (e / jp).acosh();
            assert!((ll.xi - want).abs() < 0.02 * want, "E {e}: {} vs {want}", ll.xi);
            assert!(ll.converged);
        }
    }

    #[test]
    fn clean_band_states_are_extended() {
        let jp = 0.75f64.sqrt();
        for e in [0.0, 0.3, -0.7] {
            let ll = localization_length(e, 0.0, jp, 20_000, 1).unwrap();
            assert!(ll.extended, "E {e}: xi {}", ll.xi);
        }
    }

    #[test]
    fn lyapunov_grows_with_disorder() {
        let jp = 0.75f64.sqrt();
        let lam: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&w| localization_length(0.1, w, jp, 50_000, 3).unwrap().lambda)
            .collect();
        assert!(lam.windows(2).all(|p| p[0] < p[1]), "{lam:?}");
        assert!(lam.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn dos_is_normalized_with_band_edge_peaks() {
        let p = ModelParams::new(1.0, -0.5, 0.0, 2000, Boundary::Open).unwrap();
        let opts = SpectralOptions {
            realizations: 1,
            bins: 21,
            ..SpectralOptions::default()
        };
        let h = density_of_states(&p, &opts).unwrap();
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
        let n = h.density.len();
        assert!(h.density[0] > h.density[n / 2] && h.density[n - 1] > h.density[n / 2]);
    }

    #[test]
    fn disordered_dos_is_symmetric() {
        let p = ModelParams::new(1.0, -0.5, 3.0, 64, Boundary::Open).unwrap();
        let opts = SpectralOptions {
            realizations: 200,
            bins: 10,
            execution: Execution::Sequential,
            ..SpectralOptions::default()
        };
        let h = density_of_states(&p, &opts).unwrap();
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
        let total: usize = h.counts.iter().sum();
        for b in 0..5 {
            let (a, c) = (h.counts[b] as f64, h.counts[9 - b] as f64);
            let sigma = (a + c).sqrt().max(1.0);
            assert!((a - c).abs() < 5.0 * sigma, "bin {b}: {a} vs {c} of {total}");
        }
    }

    #[test]
    fn transfer_matrix_matches_eigenstate_envelopes() {
        let jp = 0.75f64.sqrt();
        let tm = localization_length(0.0, 3.0, jp, 200_000, 5).unwrap();
        let env = envelope_localization_length(3.0, jp, 1000, 0.0, 0.15, 30, 5).unwrap();
        assert!(env.states > 20, "{env:?}");
        assert!(
            (env.xi / tm.xi - 1.0).abs() < 0.15,
            "envelope {env:?} vs transfer {tm:?}"
        );
    }

    #[test]
    fn asymptotic_mipr_tracks_direct_mipr_without_skin() {
        let p = ModelParams::new(1.0, 0.0, 8.0, 512, Boundary::Open).unwrap();
        let opts = SpectralOptions {
            realizations: 4,
            bins: 41,
            n_sites: 20_000,
            ..SpectralOptions::default()
        };
        let direct = spectral_point(&p, &opts, true).unwrap();
        let asym = direct.asymptotic_mipr.unwrap();
        assert!(
            (asym / direct.mipr.mean - 1.0).abs() < 0.25,
            "{asym} vs {}",
            direct.mipr.mean
        );
    }

    fn direct_ipr(r: f64, xi: f64, x_n: usize, l: usize) -> f64 {
        let logs: Vec<f64> = (0..l)
            .map(|x| x as f64 * r.ln() - (x as f64 - x_n as f64).abs() / xi)
            .collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = logs.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = p.iter().sum();
        p.iter().map(|v| (v / s).powi(2)).sum()
    }

    #[test]
    fn asymptotic_ipr_limits() {
        assert!((asymptotic_ipr(1.0, 1e-6, 10, 20).unwrap() - 1.0).abs() < 1e-12);
        // Partially extended: r e^{1/ξ} = 1 with the peak at the right end.
        let r = 1.0 / 3.0;
        let xi = 1.0 / 3f64.ln();
        for l in [64, 256, 1024] {
            let v = asymptotic_ipr(r, xi, l - 1, l).unwrap();
            assert!((v * l as f64 - 1.0).abs() < 0.05, "L {l}: {v}");
        }
        assert!(asymptotic_ipr(0.0, 1.0, 0, 4).is_err());
        assert!(asymptotic_ipr(1.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn asymptotic_ipr_matches_closed_form_in_the_bulk() {
        for xi in [0.5, 1.0, 3.0, 10.0] {
            let q = (-1.0f64 / xi).exp();
            let want = (1.0 + q * q) * (1.0 - q) / (1.0 + q).powi(3);
            let got = asymptotic_ipr(1.0, xi, 500, 1000).unwrap();
            assert!((got - want).abs() < 1e-12, "xi {xi}: {got} vs {want}");
        }
    }

    #[test]
    fn asymptotic_ipr_survives_huge_gauge_factors() {
        // r^L overflows a double; the log-domain sums must not.
        let got = asymptotic_ipr(1e-3, 2.0, 700, 1400).unwrap();
        assert!(got.is_finite() && got > 0.0 && got <= 1.0);
        let got = asymptotic_ipr(1e3, 2.0, 700, 1400).unwrap();
        assert!(got.is_finite() && got > 0.0 && got <= 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn asymptotic_ipr_matches_direct_sum(r in 0.2f64..3.0, xi in 0.1f64..20.0, frac in 0.0f64..1.0, l in 4usize..200) {
            let x_n = ((l - 1) as f64 * frac) as usize;
            let a = asymptotic_ipr(r, xi, x_n, l).unwrap();
            let b = direct_ipr(r, xi, x_n, l);
            prop_assert!((a - b).abs() < 1e-10 * b.max(1e-3), "{} vs {}", a, b);
        }

        #[test]
        fn asymptotic_ipr_nonincreasing_in_xi(xi in 0.05f64..50.0, dxi in 0.0f64..10.0, l in 10usize..300) {
            let a = asymptotic_ipr(1.0, xi, l / 2, l).unwrap();
            let b = asymptotic_ipr(1.0, xi + dxi, l / 2, l).unwrap();
            prop_assert!(b <= a + 1e-12);
        }

        #[test]
        fn orthogonality_index_ignores_column_phases(seed in 0u64..500, phase in 0.0f64..std::f64::consts::TAU) {
            let es = eigen_system(&instance(-0.5, 2.0, 12, seed)).unwrap();
            let mut u = es.vectors.clone();
            for (n, mut c) in u.columns_mut().into_iter().enumerate() {
                let ph = C64::from_polar(1.0, phase * (n as f64 + 1.0));
                c.mapv_inplace(|z| z * ph);
            }
            let a = orthogonality_index(&es.vectors).unwrap();
            let b = orthogonality_index(&u).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a <= 1.0 + 1e-12);
            let m = es.mipr();
            prop_assert!((1.0 / 12.0 - 1e-12..=1.0 + 1e-12).contains(&m));
        }
    }
}
