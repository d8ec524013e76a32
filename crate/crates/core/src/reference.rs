//! Independent oracles for the dynamics engine.
//!
//! * Brute-force evolution in the half-filled Fock sector (L ≤ 12), with the
//!   sector exponential taken from a dense eigendecomposition and entropies
//!   from Schmidt values of the many-body amplitudes.
//! * Closed-form correlation matrix of the clean ring's long-time state and
//!   its gauge relation to the Hermitian half-filled chain.

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Solve, SVD};

use crate::error::{Error, Result};
use crate::evolve::CorrelationMatrix;
use crate::model::{Hamiltonian, C64};
use crate::observables::Subsystem;

/// Largest chain the brute-force oracle accepts.
pub const MAX_BRUTE_FORCE_SITES: usize = 12;

/// Half-filled occupation basis, sorted by bitmask (bit `i` is site `i`).
#[derive(Clone, Debug)]
pub struct FockBasis {
    pub sites: usize,
    pub states: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl FockBasis {
    pub fn half_filled(sites: usize) -> Self {
        let n = sites / 2;
        let states: Vec<u64> = (0u64..1 << sites).filter(|s| s.count_ones() as usize == n).collect();
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        FockBasis { sites, states, index }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.index.get(&state).copied()
    }
}

fn parity_below(state: u64, site: usize) -> f64 {
    if (state & ((1u64 << site) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `c†_i c_j |state⟩ = sign |out⟩`, or `None` if it vanishes.
fn hop(state: u64, i: usize, j: usize) -> Option<(u64, f64)> {
    if state & (1 << j) == 0 {
        return None;
    }
    let s1 = parity_below(state, j);
    let mid = state ^ (1 << j);
    if mid & (1 << i) != 0 {
        return None;
    }
    let s2 = parity_below(mid, i);
    Some((mid | (1 << i), s1 * s2))
}

/// Matrix of `Σ_ij H_ij c†_i c_j` in the half-filled sector.
pub fn many_body_matrix(h: &Array2<C64>, basis: &FockBasis) -> Array2<C64> {
    let l = basis.sites;
    let dim = basis.dim();
    let mut m = Array2::<C64>::zeros((dim, dim));
    for (col, &state) in basis.states.iter().enumerate() {
        for i in 0..l {
            for j in 0..l {
                let hij = h[[i, j]];
                if hij.norm() == 0.0 {
                    continue;
                }
                if let Some((out, sign)) = hop(state, i, j) {
                    let row = basis.index_of(out).expect("hopping conserves particle number");
                    m[[row, col]] += hij * sign;
                }
            }
        }
    }
    m
}

/// Normalized many-body state.
#[derive(Clone, Debug)]
pub struct FockVector {
    pub basis: FockBasis,
    pub amplitudes: Array1<C64>,
}

impl FockVector {
    /// Néel configuration, occupied 0-based sites 1, 3, 5, ...
    pub fn neel(basis: FockBasis) -> Self {
        let mask: u64 = (0..basis.sites / 2).map(|j| 1u64 << (2 * j + 1)).sum();
        let mut amplitudes = Array1::<C64>::zeros(basis.dim());
        amplitudes[basis.index_of(mask).expect("Néel state is half filled")] = C64::new(1.0, 0.0);
        FockVector { basis, amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨c†_i c_j⟩`.
    pub fn correlation_matrix(&self) -> CorrelationMatrix {
        let l = self.basis.sites;
        let mut d = Array2::<C64>::zeros((l, l));
        for (col, &state) in self.basis.states.iter().enumerate() {
            let amp = self.amplitudes[col];
            if amp.norm() == 0.0 {
                continue;
            }
            for i in 0..l {
                for j in 0..l {
                    if let Some((out, sign)) = hop(state, i, j) {
                        let row = self.basis.index_of(out).unwrap();
                        d[[i, j]] += self.amplitudes[row].conj() * amp * sign;
                    }
                }
            }
        }
        CorrelationMatrix::new(d)
    }

    /// Von Neumann entropy of `a` from the Schmidt decomposition.
    ///
    /// Modes are reordered so that `a` comes first; each basis state picks
    /// up the fermionic sign of that permutation.
    pub fn entropy(&self, a: &Subsystem) -> Result<f64> {
        let l = self.basis.sites;
        let a_sites = a.sites();
        if a_sites.iter().any(|&s| s >= l) || a.is_empty() {
            return Err(Error::Domain("subsystem outside the chain".into()));
        }
        let b_sites: Vec<usize> = (0..l).filter(|s| !a_sites.contains(s)).collect();
        let mut sorted_a = a_sites.to_vec();
        sorted_a.sort_unstable();
        let extract = |state: u64, sites: &[usize]| -> usize {
            sites
                .iter()
                .enumerate()
                .filter(|(_, &s)| state & (1 << s) != 0)
                .map(|(k, _)| 1usize << k)
                .sum()
        };
        let mut m = Array2::<C64>::zeros((1 << sorted_a.len(), 1 << b_sites.len()));
        for (idx, &state) in self.basis.states.iter().enumerate() {
            let crossings: u32 = sorted_a
                .iter()
                .filter(|&&s| state & (1 << s) != 0)
                .map(|&s| b_sites.iter().filter(|&&b| b < s && state & (1 << b) != 0).count() as u32)
                .sum();
            let sign = if crossings.is_multiple_of(2) { 1.0 } else { -1.0 };
            m[[extract(state, &sorted_a), extract(state, &b_sites)]] = self.amplitudes[idx] * sign;
        }
        let (_, sv, _) = m.svd(false, false)?;
        Ok(sv.iter().map(|s| s * s).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum())
    }
}

/// Normalized `e^{-iĤt}|Néel⟩` by brute force.
pub fn brute_force_evolution(h: &Hamiltonian, t: f64) -> Result<FockVector> {
    let l = h.len();
    if l > MAX_BRUTE_FORCE_SITES {
        return Err(Error::InvalidParameter(format!(
            "brute force limited to {MAX_BRUTE_FORCE_SITES} sites, got {l}"
        )));
    }
    if !l.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("odd chain length {l}")));
    }
    let basis = FockBasis::half_filled(l);
    let psi0 = FockVector::neel(basis.clone());
    if t == 0.0 {
        return Ok(psi0);
    }
    let m = many_body_matrix(&h.matrix, &basis);
    let psi = if h.is_hermitian() {
        let (e, v) = crate::linalg::eigh(&m)?;
        let c = v.t().mapv(|z| z.conj()).dot(&psi0.amplitudes);
        let phased = Array1::from_iter(
            c.iter()
                .zip(e.iter())
                .map(|(ck, &ek)| ck * C64::new(0.0, -ek * t).exp()),
        );
        v.dot(&phased)
    } else {
        let (e, v) = m.eig()?;
        let c = v.solve(&psi0.amplitudes)?;
        // Shift by the largest growth rate so nothing overflows; the
        // normalization below removes the common factor.
        let top = e.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
        let phased = Array1::from_iter(
            c.iter()
                .zip(e.iter())
                .map(|(ck, ek)| ck * (C64::new(0.0, -t) * (ek - C64::new(0.0, top))).exp()),
        );
        v.dot(&phased)
    };
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(FockVector {
        basis,
        amplitudes: psi.mapv(|z| z / norm),
    })
}

/// Long-time correlation matrix of the clean ring together with the momenta
/// it occupies.
#[derive(Clone, Debug)]
pub struct CleanRingCorrelation {
    pub matrix: CorrelationMatrix,
    /// Integers `n` of the occupied momenta `k = 2πn/L`.
    pub occupied: Vec<i64>,
}

/// Occupied momenta of the clean ring's steady state for `γ < 0`.
///
/// Candidates are `n = -L/2 ..= 0`; the `L/2` modes with the largest
/// `γ sin k` are kept, breaking the tie between `k = -π` and `k = 0` toward
/// negative `k`.
pub fn clean_ring_occupation(l: usize) -> Vec<i64> {
    let half = (l / 2) as i64;
    let mut candidates: Vec<(f64, i64)> = (-half..=0)
        .map(|n| {
            let k = 2.0 * PI * n as f64 / l as f64;
            // Growth rate γ sin k for γ = -1; only the ordering matters.
            (-k.sin(), n)
        })
        .collect();
    candidates.sort_by(|a, b| {
        let d = b.0 - a.0;
        if d.abs() > 1e-12 {
            b.0.total_cmp(&a.0)
        } else {
            a.1.cmp(&b.1)
        }
    });
    let mut occ: Vec<i64> = candidates.iter().take(l / 2).map(|c| c.1).collect();
    occ.sort_unstable();
    occ
}

/// `D_mn = (1/L) Σ_{k occ} e^{-ik(m-n)}` for a given set of momenta.
fn momentum_sum(l: usize, occupied: &[i64], shift: f64) -> Array2<C64> {
    let ks: Vec<f64> = occupied
        .iter()
        .map(|&n| 2.0 * PI * n as f64 / l as f64 + shift)
        .collect();
    Array2::from_shape_fn((l, l), |(m, n)| {
        let d = m as f64 - n as f64;
        ks.iter().map(|&k| C64::new(0.0, -k * d).exp()).sum::<C64>() / l as f64
    })
}

pub fn clean_pbc_correlation(l: usize) -> Result<CleanRingCorrelation> {
    if l < 2 || !l.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("L must be even, got {l}")));
    }
    let occupied = clean_ring_occupation(l);
    Ok(CleanRingCorrelation {
        matrix: CorrelationMatrix::new(momentum_sum(l, &occupied, 0.0)),
        occupied,
    })
}

/// Infinite-chain limit `D_mn = i/(π(m-n))` for odd `m-n`, zero for even,
/// one half on the diagonal.
pub fn thermodynamic_ring_entry(separation: i64) -> C64 {
    if separation == 0 {
        C64::new(0.5, 0.0)
    } else if separation % 2 == 0 {
        C64::new(0.0, 0.0)
    } else {
        C64::new(0.0, 1.0 / (PI * separation as f64))
    }
}

/// `U†DU` with `U = diag(i, i², i³, ...)`.
pub fn gauge_rotate(d: &CorrelationMatrix) -> CorrelationMatrix {
    let l = d.sites();
    let phase = |m: usize| C64::new(0.0, 1.0).powu((m + 1) as u32);
    CorrelationMatrix::new(Array2::from_shape_fn((l, l), |(m, n)| {
        phase(m).conj() * d.matrix[[m, n]] * phase(n)
    }))
}

/// Ground-state correlations of the Hermitian half-filled chain whose Fermi
/// sea is the clean-ring occupation shifted by `π/2`.
pub fn hermitian_chain_correlation(l: usize) -> CorrelationMatrix {
    let shifted: Vec<f64> = clean_ring_occupation(l)
        .iter()
        .map(|&n| 2.0 * PI * n as f64 / l as f64 + PI / 2.0)
        .collect();
    CorrelationMatrix::new(Array2::from_shape_fn((l, l), |(m, n)| {
        let d = m as f64 - n as f64;
        // Real-valued sum of cosines when the sea is symmetric; keep the
        // general complex form.
        shifted
            .iter()
            .map(|&k| C64::new((k * d).cos(), -(k * d).sin()))
            .sum::<C64>()
            / l as f64
    }))
}

/// `max |U†DU - D'|` against the Hermitian-chain correlations.
pub fn gauge_check(d: &CorrelationMatrix) -> f64 {
    let rotated = gauge_rotate(d);
    let target = hermitian_chain_correlation(d.sites());
    (&rotated.matrix - &target.matrix)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, sample_disorder, Boundary, DisorderRealization, ModelParams};
    use crate::observables::{entanglement_entropy, subsystem_spectrum};
    use ndarray_linalg::{EigValsh, UPLO};

    fn max_abs(a: &Array2<C64>) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn basis_dimension_and_order() {
        let b = FockBasis::half_filled(6);
        assert_eq!(b.dim(), 20);
        assert!(b.states.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(FockBasis::half_filled(12).dim(), 924);
    }

    #[test]
    fn fermionic_signs_of_hopping() {
        // c†_0 c_2 on |011⟩ (sites 1, 2 occupied) passes one fermion.
        assert_eq!(hop(0b110, 0, 2), Some((0b011, -1.0)));
        assert_eq!(hop(0b010, 0, 1), Some((0b001, 1.0)));
        assert_eq!(hop(0b011, 0, 1), None);
        assert_eq!(hop(0b010, 1, 1), Some((0b010, 1.0)));
    }

    #[test]
    fn time_zero_is_neel() {
        let p = ModelParams::new(1.0, -0.5, 2.0, 6, Boundary::Open).unwrap();
        let h = build_hamiltonian(&p, &sample_disorder(&p, 1)).unwrap();
        let psi = brute_force_evolution(&h, 0.0).unwrap();
        let d = psi.correlation_matrix();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j && i % 2 == 1 { 1.0 } else { 0.0 };
                assert!((d.matrix[[i, j]] - C64::new(want, 0.0)).norm() < 1e-15);
            }
        }
        for l in 1..6 {
            assert!(psi.entropy(&Subsystem::prefix(l)).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_large_chains() {
        let p = ModelParams::new(1.0, 0.0, 0.0, 14, Boundary::Open).unwrap();
        let h = build_hamiltonian(&p, &DisorderRealization::clean(14)).unwrap();
        assert!(brute_force_evolution(&h, 1.0).is_err());
    }

    #[test]
    fn many_body_spectrum_is_sum_of_single_particle_levels() {
        let p = ModelParams::new(1.0, 0.0, 1.0, 6, Boundary::Open).unwrap();
        let h = build_hamiltonian(&p, &sample_disorder(&p, 3)).unwrap();
        let single = h.matrix.eigvalsh(UPLO::Lower).unwrap().to_vec();
        let basis = FockBasis::half_filled(6);
        let mut many: Vec<f64> = many_body_matrix(&h.matrix, &basis)
            .eigvalsh(UPLO::Lower)
            .unwrap()
            .to_vec();
        let mut sums = Vec::new();
        for s in &basis.states {
            sums.push((0..6).filter(|i| s & (1 << i) != 0).map(|i| single[i]).sum::<f64>());
        }
        sums.sort_by(f64::total_cmp);
        many.sort_by(f64::total_cmp);
        for (a, b) in sums.iter().zip(&many) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn imaginary_offset_changes_nothing() {
        let p = ModelParams::new(1.0, -0.5, 2.0, 8, Boundary::Open).unwrap();
        let h = build_hamiltonian(&p, &sample_disorder(&p, 12)).unwrap();
        let mut shifted = h.clone();
        for i in 0..8 {
            shifted.matrix[[i, i]] += C64::new(0.0, 0.3);
        }
        let d1 = brute_force_evolution(&h, 7.0).unwrap().correlation_matrix();
        let d2 = brute_force_evolution(&shifted, 7.0).unwrap().correlation_matrix();
        assert!(max_abs(&(&d1.matrix - &d2.matrix)) < 1e-10);
    }

    #[test]
    fn schmidt_entropy_equals_correlation_entropy() {
        let p = ModelParams::new(1.0, -0.5, 2.0, 8, Boundary::Periodic).unwrap();
        let h = build_hamiltonian(&p, &sample_disorder(&p, 2)).unwrap();
        let psi = brute_force_evolution(&h, 3.0).unwrap();
        let d = psi.correlation_matrix();
        for sites in [vec![0, 1, 2], vec![2, 3, 4, 5], vec![0, 5], vec![1, 4, 6]] {
            let a = Subsystem::new(sites, 8).unwrap();
            let s_rho = psi.entropy(&a).unwrap();
            let s_d = entanglement_entropy(&d, &a).unwrap();
            assert!((s_rho - s_d).abs() < 1e-9, "{s_rho} vs {s_d}");
        }
    }

    #[test]
    fn clean_ring_occupation_convention() {
        assert_eq!(clean_ring_occupation(8), vec![-4, -3, -2, -1]);
        let c = clean_pbc_correlation(64).unwrap();
        assert_eq!(c.occupied.len(), 32);
        let d = &c.matrix;
        assert!(d.hermiticity_error() < 1e-13);
        for i in 0..64 {
            assert!((d.matrix[[i, i]].re - 0.5).abs() < 1e-13);
        }
        // Toeplitz.
        for m in 1..64 {
            for n in 1..64 {
                assert!((d.matrix[[m, n]] - d.matrix[[m - 1, n - 1]]).norm() < 1e-13);
            }
        }
        let eig = subsystem_spectrum(d, &Subsystem::prefix(64)).unwrap();
        assert!(eig.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
    }

    #[test]
    fn ring_separation_structure() {
        let l = 256;
        let d = clean_pbc_correlation(l).unwrap().matrix;
        for sep in 1..20usize {
            let z = d.matrix[[sep, 0]];
            if sep % 2 == 0 {
                assert!(z.norm() < 2.0 / l as f64);
            } else {
                let want = thermodynamic_ring_entry(sep as i64);
                assert!((z - want).norm() < 4.0 / l as f64, "sep {sep}: {z} vs {want}");
            }
        }
    }

    #[test]
    fn gauge_relation_holds() {
        let d = clean_pbc_correlation(64).unwrap().matrix;
        assert!(gauge_check(&d) < 5e-3);
        let rotated = gauge_rotate(&d);
        let full = Subsystem::prefix(64);
        let half = Subsystem::prefix(32);
        let e1 = subsystem_spectrum(&d, &full).unwrap();
        let e2 = subsystem_spectrum(&rotated, &full).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-12);
        }
        let s1 = entanglement_entropy(&d, &half).unwrap();
        let s2 = entanglement_entropy(&rotated, &half).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
    }
}
