//! Finite-size-scaling collapse of half-chain entropies.
//!
//! The ansatz is `S(W, L) = L^β F((W - W_c) L^{1/ν})`. A trial
//! `(W_c, ν, β)` maps every row to `x = (W - W_c) L^{1/ν}`, `y = S / L^β`;
//! the loss compares each row with the mean of the other sizes' curves,
//! linearly interpolated at the same `x`, inside the window where all curves
//! overlap.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::mix_seed;
use crate::output::format_float;
use crate::parallel::{map_indexed, Execution};
use crate::simplex::{minimize, SimplexOptions};
use crate::stats::{linear_fit, sample_std};

/// One `S_{L/2}` measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseRow {
    pub w: f64,
    pub l: usize,
    pub y: f64,
    pub y_err: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CollapseDataset {
    rows: Vec<CollapseRow>,
}

/// Trial or fitted scaling parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseParams {
    pub wc: f64,
    pub nu: f64,
    pub beta: f64,
}

impl CollapseParams {
    fn to_vec(self) -> Vec<f64> {
        vec![self.wc, self.nu, self.beta]
    }

    fn from_slice(x: &[f64]) -> Self {
        CollapseParams {
            wc: x[0],
            nu: x[1],
            beta: x[2],
        }
    }
}

impl CollapseDataset {
    /// Rows must be finite with non-negative `y`.
    pub fn new(rows: Vec<CollapseRow>) -> Result<Self> {
        for r in &rows {
            if !(r.w.is_finite() && r.y.is_finite() && r.y_err.is_finite()) {
                return Err(Error::Data(format!("non-finite row {r:?}")));
            }
            if r.y < 0.0 {
                return Err(Error::Data(format!("negative entropy in row {r:?}")));
            }
        }
        Ok(CollapseDataset { rows })
    }

    pub fn rows(&self) -> &[CollapseRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct sizes, ascending.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.rows.iter().map(|r| r.l).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Distinct disorder strengths, ascending.
    pub fn w_values(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.rows.iter().map(|r| r.w).collect();
        w.sort_by(f64::total_cmp);
        w.dedup();
        w
    }

    /// Checks the minimum shape a fit needs: two sizes and three `W` values.
    pub fn validate_for_fit(&self) -> Result<()> {
        let (nl, nw) = (self.sizes().len(), self.w_values().len());
        if nl < 2 || nw < 3 {
            return Err(Error::Data(format!(
                "a collapse needs at least 2 sizes and 3 W values, got {nl} and {nw}"
            )));
        }
        Ok(())
    }

    pub fn with_sizes(&self, sizes: &[usize]) -> Self {
        CollapseDataset {
            rows: self.rows.iter().filter(|r| sizes.contains(&r.l)).copied().collect(),
        }
    }

    pub fn with_min_w(&self, w_min: f64) -> Self {
        CollapseDataset {
            rows: self.rows.iter().filter(|r| r.w >= w_min).copied().collect(),
        }
    }

    /// Every `y` (and its error) multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        CollapseDataset {
            rows: self
                .rows
                .iter()
                .map(|r| CollapseRow {
                    y: r.y * c,
                    y_err: r.y_err * c,
                    ..*r
                })
                .collect(),
        }
    }

    /// Reads rows from a CSV with columns `W`, `L`, `S_half` and optionally
    /// `S_half_err` and `gamma`. When the file holds several `γ` values one
    /// must be selected.
    pub fn read_csv<R: Read>(reader: R, gamma: Option<f64>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let need = |name: &str| col(name).ok_or_else(|| Error::Data(format!("missing column `{name}`")));
        let (iw, il, iy) = (need("W")?, need("L")?, need("S_half")?);
        let (ie, ig) = (col("S_half_err"), col("gamma"));

        let num = |rec: &csv::StringRecord, i: usize, line: u64| -> Result<f64> {
            let field = rec.get(i).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("line {line}: cannot parse `{field}` as a number")))
        };
        let mut rows = Vec::new();
        let mut gammas = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if let Some(ig) = ig {
                let g = num(&rec, ig, line)?;
                if let Some(want) = gamma {
                    if (g - want).abs() > 1e-12 {
                        continue;
                    }
                }
                if !gammas.contains(&g) {
                    gammas.push(g);
                }
            }
            let l = num(&rec, il, line)?;
            if l < 1.0 || l.fract() != 0.0 {
                return Err(Error::Data(format!("line {line}: L must be a positive integer")));
            }
            rows.push(CollapseRow {
                w: num(&rec, iw, line)?,
                l: l as usize,
                y: num(&rec, iy, line)?,
                y_err: match ie {
                    Some(i) => num(&rec, i, line)?,
                    None => 0.0,
                },
            });
        }
        if gammas.len() > 1 {
            return Err(Error::Data(format!(
                "file holds several gamma values {gammas:?}; select one"
            )));
        }
        Self::new(rows)
    }

    pub fn read_csv_path(path: &Path, gamma: Option<f64>) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, gamma)
    }

    /// Writes `W,L,S_half,S_half_err` rows at full precision.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["W", "L", "S_half", "S_half_err"])?;
        for r in &self.rows {
            w.write_record([
                format_float(r.w),
                r.l.to_string(),
                format_float(r.y),
                format_float(r.y_err),
            ])?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }
}

/// Loss at one parameter point, normalized and raw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Sum of squared deviations divided by `rows`.
    pub normalized: f64,
    pub unnormalized: f64,
    /// Rows inside the common overlap window.
    pub rows: usize,
}

impl LossBreakdown {
    const DEGENERATE: LossBreakdown = LossBreakdown {
        normalized: f64::INFINITY,
        unnormalized: f64::INFINITY,
        rows: 0,
    };
}

/// Scaled curves keyed by size, each sorted by `x`.
fn scaled_curves(data: &CollapseDataset, p: CollapseParams) -> Option<BTreeMap<usize, Vec<(f64, f64)>>> {
    if !(p.nu > 0.0 && p.wc.is_finite() && p.nu.is_finite() && p.beta.is_finite()) {
        return None;
    }
    let mut curves: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &data.rows {
        let lf = r.l as f64;
        let x = (r.w - p.wc) * lf.powf(1.0 / p.nu);
        let y = r.y / lf.powf(p.beta);
        if !(x.is_finite() && y.is_finite()) {
            return None;
        }
        curves.entry(r.l).or_default().push((x, y));
    }
    for c in curves.values_mut() {
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    Some(curves)
}

/// Linear interpolation on a sorted curve; `x` must lie within its range.
fn interpolate(curve: &[(f64, f64)], x: f64) -> f64 {
    let i = curve.partition_point(|p| p.0 < x);
    if i == 0 {
        return curve[0].1;
    }
    if i == curve.len() {
        return curve[i - 1].1;
    }
    let (x0, y0) = curve[i - 1];
    let (x1, y1) = curve[i];
    if x1 == x {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

pub fn loss_breakdown(data: &CollapseDataset, p: CollapseParams) -> LossBreakdown {
    let Some(curves) = scaled_curves(data, p) else {
        return LossBreakdown::DEGENERATE;
    };
    let curves: Vec<&Vec<(f64, f64)>> = curves.values().filter(|c| c.len() >= 2).collect();
    if curves.len() < 2 {
        return LossBreakdown::DEGENERATE;
    }
    let lo = curves.iter().map(|c| c[0].0).fold(f64::NEG_INFINITY, f64::max);
    let hi = curves.iter().map(|c| c[c.len() - 1].0).fold(f64::INFINITY, f64::min);
    if lo > hi {
        return LossBreakdown::DEGENERATE;
    }
    let mut total = 0.0;
    let mut rows = 0;
    for (k, curve) in curves.iter().enumerate() {
        for &(x, y) in curve.iter().filter(|p| p.0 >= lo && p.0 <= hi) {
            let others: f64 = curves
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != k)
                .map(|(_, c)| interpolate(c, x))
                .sum();
            let ybar = others / (curves.len() - 1) as f64;
            total += (y - ybar).powi(2);
            rows += 1;
        }
    }
    if rows == 0 {
        return LossBreakdown::DEGENERATE;
    }
    LossBreakdown {
        normalized: total / rows as f64,
        unnormalized: total,
        rows,
    }
}

/// Normalized collapse loss; `+∞` when fewer than two curves overlap.
pub fn collapse_loss(data: &CollapseDataset, p: CollapseParams) -> f64 {
    loss_breakdown(data, p).normalized
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub restarts: usize,
    /// Relative half-width of the uniform jitter applied to restarts after
    /// the first.
    pub jitter: f64,
    /// Rows with `W < init.wc - margin` are left out of the fit.
    pub margin: f64,
    pub seed: u64,
    pub simplex: SimplexOptions,
    pub execution: Execution,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 8,
            jitter: 0.1,
            margin: 0.35,
            seed: 0x5eed,
            simplex: SimplexOptions::default(),
            execution: Execution::Parallel,
        }
    }
}

/// Allowed range of `ν` during fits.
pub const NU_RANGE: (f64, f64) = (0.5, 5.0);
/// Allowed range of `β` during fits. Without an upper bound the absolute
/// loss is driven to zero by `β → ∞`, which shrinks every rescaled curve.
pub const BETA_RANGE: (f64, f64) = (0.0, 1.0);

/// Closed box searched by the simplex; the loss is `+∞` outside it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub wc: (f64, f64),
    pub nu: (f64, f64),
    pub beta: (f64, f64),
}

impl SearchBox {
    /// `W_c` anywhere in the data's `W` range.
    pub fn for_data(data: &CollapseDataset) -> Self {
        let w = data.w_values();
        SearchBox {
            wc: (w.first().copied().unwrap_or(0.0), w.last().copied().unwrap_or(0.0)),
            nu: NU_RANGE,
            beta: BETA_RANGE,
        }
    }

    fn ranges(&self) -> [(f64, f64); 3] {
        [self.wc, self.nu, self.beta]
    }

    pub fn contains(&self, p: CollapseParams) -> bool {
        self.ranges()
            .iter()
            .zip(p.to_vec())
            .all(|(&(lo, hi), v)| v >= lo && v <= hi)
    }

    /// Whether any parameter sits within `tol` (relative to the range) of an edge.
    pub fn touches(&self, p: CollapseParams, tol: f64) -> bool {
        self.ranges().iter().zip(p.to_vec()).any(|(&(lo, hi), v)| {
            let span = (hi - lo).abs().max(f64::MIN_POSITIVE);
            (v - lo) / span < tol || (hi - v) / span < tol
        })
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, &(lo, hi)) in x.iter_mut().zip(self.ranges().iter()) {
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseFit {
    pub params: CollapseParams,
    /// Normalized loss at `params` over the fit domain.
    pub loss: f64,
    pub loss_unnormalized: f64,
    pub rows_used: usize,
    /// Lower edge of the fit domain in `W`.
    pub fit_min_w: f64,
    pub sizes: Vec<usize>,
    /// False when the best restart hit the iteration cap.
    pub converged: bool,
    pub bounds: SearchBox,
    /// The best point lies on the edge of `bounds`; treat it with suspicion.
    pub on_boundary: bool,
}

fn restart_point(init: CollapseParams, k: usize, opts: &FitOptions, bounds: &SearchBox) -> Vec<f64> {
    let mut x = init.to_vec();
    if k > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[opts.seed, k as u64]));
        for v in x.iter_mut() {
            *v *= 1.0 + opts.jitter * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    bounds.clamp(&mut x);
    x
}

/// Fits on `domain` as given, without further row selection.
fn fit_domain(
    domain: &CollapseDataset,
    init: CollapseParams,
    fit_min_w: f64,
    bounds: &SearchBox,
    opts: &FitOptions,
) -> Result<CollapseFit> {
    domain.validate_for_fit()?;
    let restarts = opts.restarts.max(1);
    let objective = |x: &[f64]| {
        let p = CollapseParams::from_slice(x);
        if bounds.contains(p) {
            collapse_loss(domain, p)
        } else {
            f64::INFINITY
        }
    };
    let results = map_indexed(restarts, opts.execution, |k| {
        let x0 = restart_point(init, k, opts, bounds);
        let steps: Vec<f64> = x0
            .iter()
            .map(|v| if *v != 0.0 { 0.1 * v.abs() } else { 0.05 })
            .collect();
        minimize(objective, &x0, &steps, &opts.simplex)
    });
    let best = results
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one restart");
    if !best.value.is_finite() {
        return Err(Error::Domain("no parameter point gave overlapping curves".into()));
    }
    if !best.converged {
        log::warn!(
            "collapse fit did not converge within {} iterations; reporting best so far",
            opts.simplex.max_iterations
        );
    }
    let params = CollapseParams::from_slice(&best.x);
    let on_boundary = bounds.touches(params, 1e-6);
    if on_boundary {
        log::warn!("collapse fit ended on the edge of the search box: {params:?}");
    }
    let lb = loss_breakdown(domain, params);
    Ok(CollapseFit {
        params,
        loss: lb.normalized,
        loss_unnormalized: lb.unnormalized,
        rows_used: lb.rows,
        fit_min_w,
        sizes: domain.sizes(),
        converged: best.converged,
        bounds: *bounds,
        on_boundary,
    })
}

/// Best of `opts.restarts` simplex descents over rows with
/// `W ≥ init.wc - opts.margin`, searching within [`SearchBox::for_data`].
pub fn fit_collapse(data: &CollapseDataset, init: CollapseParams, opts: &FitOptions) -> Result<CollapseFit> {
    let bounds = SearchBox::for_data(data);
    if !bounds.contains(init) {
        return Err(Error::InvalidParameter(format!(
            "initial guess {init:?} lies outside the search box {bounds:?}"
        )));
    }
    let fit_min_w = init.wc - opts.margin;
    fit_domain(&data.with_min_w(fit_min_w), init, fit_min_w, &bounds, opts)
}

/// Spread of refits over subsets of sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    /// Sample standard deviation of each parameter across subset fits.
    pub std: CollapseParams,
    pub subsets_used: Vec<Vec<usize>>,
    pub subset_fits: Vec<CollapseParams>,
}

/// Every subset that leaves out exactly one size.
pub fn drop_one_subsets(sizes: &[usize]) -> Vec<Vec<usize>> {
    (0..sizes.len())
        .map(|skip| {
            sizes
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, &l)| l)
                .collect()
        })
        .collect()
}

/// Refits on each subset of sizes (same fit domain as `fit`, started from
/// its parameters) and reports the per-parameter spread.
pub fn estimate_uncertainty(
    data: &CollapseDataset,
    fit: &CollapseFit,
    subsets: &[Vec<usize>],
    opts: &FitOptions,
) -> Result<Uncertainty> {
    let domain = data.with_min_w(fit.fit_min_w);
    let inner = FitOptions {
        execution: Execution::Sequential,
        ..*opts
    };
    let fits = map_indexed(subsets.len(), opts.execution, |k| {
        let sub = domain.with_sizes(&subsets[k]);
        if subsets[k].len() < 2 {
            return None;
        }
        match fit_domain(&sub, fit.params, fit.fit_min_w, &fit.bounds, &inner) {
            Ok(f) => Some(f.params),
            Err(e) => {
                log::warn!("skipping size subset {:?}: {e}", subsets[k]);
                None
            }
        }
    });
    let mut used = Vec::new();
    let mut params = Vec::new();
    for (s, f) in subsets.iter().zip(fits) {
        if let Some(p) = f {
            used.push(s.clone());
            params.push(p);
        }
    }
    if params.len() < 3 {
        return Err(Error::Domain(format!(
            "uncertainty needs at least 3 usable size subsets, got {}",
            params.len()
        )));
    }
    let pick = |f: fn(&CollapseParams) -> f64| sample_std(&params.iter().map(f).collect::<Vec<_>>());
    Ok(Uncertainty {
        std: CollapseParams {
            wc: pick(|p| p.wc),
            nu: pick(|p| p.nu),
            beta: pick(|p| p.beta),
        },
        subsets_used: used,
        subset_fits: params,
    })
}

/// Log–log slope of the largest size's entropy against `W - W_c` deep on
/// the localized side, with the `-νβ` it should match.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub slope: f64,
    pub intercept: f64,
    pub expected: f64,
    pub size: usize,
    pub points: usize,
}

pub fn tail_exponent_check(data: &CollapseDataset, p: CollapseParams, offset: f64) -> Result<TailCheck> {
    let size = *data.sizes().last().ok_or_else(|| Error::Data("empty dataset".into()))?;
    let pts: Vec<(f64, f64)> = data
        .rows
        .iter()
        .filter(|r| r.l == size && r.w > p.wc + offset && r.y > 0.0)
        .map(|r| ((r.w - p.wc).ln(), r.y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Domain(format!(
            "insufficient tail points: {} rows of L = {size} with W > {}",
            pts.len(),
            p.wc + offset
        )));
    }
    let fit = linear_fit(&pts).ok_or_else(|| Error::Domain("degenerate tail fit".into()))?;
    Ok(TailCheck {
        slope: fit.slope,
        intercept: fit.intercept,
        expected: -p.nu * p.beta,
        size,
        points: pts.len(),
    })
}

/// Entropy at `W = W_c` per size (linear interpolation in `W`) and its
/// log–log slope against `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalScaling {
    pub wc: f64,
    pub slope: f64,
    pub intercept: f64,
    pub values: Vec<(usize, f64)>,
}

pub fn critical_size_scaling(data: &CollapseDataset, wc: f64) -> Result<CriticalScaling> {
    let mut values = Vec::new();
    for l in data.sizes() {
        let mut curve: Vec<(f64, f64)> = data.rows.iter().filter(|r| r.l == l).map(|r| (r.w, r.y)).collect();
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        if curve.len() >= 2 && curve[0].0 <= wc && wc <= curve[curve.len() - 1].0 {
            values.push((l, interpolate(&curve, wc)));
        }
    }
    let pts: Vec<(f64, f64)> = values
        .iter()
        .filter(|v| v.1 > 0.0)
        .map(|&(l, y)| ((l as f64).ln(), y.ln()))
        .collect();
    let fit = linear_fit(&pts).ok_or_else(|| Error::Domain(format!("need two sizes bracketing W_c = {wc}")))?;
    Ok(CriticalScaling {
        wc,
        slope: fit.slope,
        intercept: fit.intercept,
        values,
    })
}

/// One point of the collapsed plot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapsedPoint {
    pub x: f64,
    pub y: f64,
    pub l: usize,
}

pub fn collapsed_curve(data: &CollapseDataset, p: CollapseParams) -> Vec<CollapsedPoint> {
    data.rows
        .iter()
        .map(|r| {
            let lf = r.l as f64;
            CollapsedPoint {
                x: (r.w - p.wc) * lf.powf(1.0 / p.nu),
                y: r.y / lf.powf(p.beta),
                l: r.l,
            }
        })
        .collect()
}

pub fn write_collapsed_csv<W: Write>(points: &[CollapsedPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "L"])?;
    for p in points {
        w.write_record([format_float(p.x), format_float(p.y), p.l.to_string()])?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

/// `A (1 + x²)^{-νβ/2}`: flat near the critical point and `∝ x^{-νβ}` in the
/// tail, so `L^β F` becomes size independent deep in the localized phase.
pub fn scaling_function(x: f64, nu: f64, beta: f64, amplitude: f64) -> f64 {
    amplitude * (1.0 + x * x).powf(-0.5 * nu * beta)
}

/// Recipe for a dataset with known scaling parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub truth: CollapseParams,
    pub amplitude: f64,
    pub sizes: Vec<usize>,
    pub w_values: Vec<f64>,
    /// Relative standard deviation of multiplicative Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            truth: CollapseParams {
                wc: 3.35,
                nu: 1.9,
                beta: 0.5,
            },
            amplitude: 0.4,
            sizes: vec![32, 64, 96, 128],
            w_values: (0..=800).map(|k| 2.0 + 0.005 * k as f64).collect(),
            noise: 0.0,
            seed: 2024,
        }
    }
}

pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<CollapseDataset> {
    let t = spec.truth;
    let normal =
        Normal::new(0.0, spec.noise.max(0.0)).map_err(|e| Error::InvalidParameter(format!("noise level: {e}")))?;
    let mut rows = Vec::with_capacity(spec.sizes.len() * spec.w_values.len());
    for &l in &spec.sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, l as u64]));
        let lf = l as f64;
        for &w in &spec.w_values {
            let x = (w - t.wc) * lf.powf(1.0 / t.nu);
            let clean = lf.powf(t.beta) * scaling_function(x, t.nu, t.beta, spec.amplitude);
            let y = clean * (1.0 + normal.sample(&mut rng));
            rows.push(CollapseRow {
                w,
                l,
                y: y.max(0.0),
                y_err: spec.noise * clean,
            });
        }
    }
    CollapseDataset::new(rows)
}
