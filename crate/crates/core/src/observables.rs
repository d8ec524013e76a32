//! Entanglement entropy, densities, connected correlations and mutual
//! information of a Gaussian state given its correlation matrix.
//!
//! Entropies are in nats. Subsystems hold 0-based site indices.

use ndarray::Array2;
use ndarray_linalg::{EigValsh, UPLO};

use crate::error::{Error, Result};
use crate::evolve::CorrelationMatrix;
use crate::model::C64;

/// Eigenvalues of `D_A` are clipped to `[ε, 1-ε]` before taking logs.
pub const ENTROPY_CLIP: f64 = 1e-12;

/// An ordered set of distinct sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subsystem {
    sites: Vec<usize>,
}

impl Subsystem {
    /// Validated subsystem of a chain with `l` sites.
    pub fn new(sites: Vec<usize>, l: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Domain("empty subsystem".into()));
        }
        let mut seen = vec![false; l];
        for &s in &sites {
            if s >= l {
                return Err(Error::Domain(format!("site {s} outside chain of {l} sites")));
            }
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::Domain(format!("site {s} listed twice")));
            }
        }
        Ok(Subsystem { sites })
    }

    /// Sites `0..l`.
    pub fn prefix(l: usize) -> Self {
        Subsystem {
            sites: (0..l).collect(),
        }
    }

    /// Sites `start..end`.
    pub fn range(start: usize, end: usize) -> Self {
        Subsystem {
            sites: (start..end).collect(),
        }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn is_disjoint(&self, other: &Subsystem) -> bool {
        !self.sites.iter().any(|s| other.sites.contains(s))
    }

    pub fn union(&self, other: &Subsystem) -> Subsystem {
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().filter(|s| !self.sites.contains(s)));
        Subsystem { sites }
    }

    pub fn complement(&self, l: usize) -> Subsystem {
        Subsystem {
            sites: (0..l).filter(|s| !self.sites.contains(s)).collect(),
        }
    }
}

/// `-Σ [ξ ln ξ + (1-ξ) ln(1-ξ)]` over clipped eigenvalues.
pub fn binary_entropy_sum(eigenvalues: &[f64], eps: f64) -> f64 {
    eigenvalues
        .iter()
        .map(|&x| {
            let x = x.clamp(eps, 1.0 - eps);
            -(x * x.ln() + (1.0 - x) * (1.0 - x).ln())
        })
        .sum()
}

fn restricted(d: &CorrelationMatrix, a: &Subsystem) -> Array2<C64> {
    let s = a.sites();
    // Hermitian part, so the eigensolver sees an exactly Hermitian matrix.
    Array2::from_shape_fn((s.len(), s.len()), |(i, j)| {
        0.5 * (d.matrix[[s[i], s[j]]] + d.matrix[[s[j], s[i]]].conj())
    })
}

/// Spectrum of the restricted correlation matrix `D_A`.
pub fn subsystem_spectrum(d: &CorrelationMatrix, a: &Subsystem) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::Domain("empty subsystem".into()));
    }
    if let Some(&bad) = a.sites().iter().find(|&&s| s >= d.sites()) {
        return Err(Error::Domain(format!(
            "site {bad} outside chain of {} sites",
            d.sites()
        )));
    }
    Ok(restricted(d, a).eigvalsh(UPLO::Lower)?.to_vec())
}

pub fn entanglement_entropy_with_clip(d: &CorrelationMatrix, a: &Subsystem, eps: f64) -> Result<f64> {
    Ok(binary_entropy_sum(&subsystem_spectrum(d, a)?, eps))
}

/// Von Neumann entropy of subsystem `a`.
pub fn entanglement_entropy(d: &CorrelationMatrix, a: &Subsystem) -> Result<f64> {
    entanglement_entropy_with_clip(d, a, ENTROPY_CLIP)
}

/// `S_{L/2}` for the left half.
pub fn half_chain_entropy(d: &CorrelationMatrix) -> Result<f64> {
    entanglement_entropy(d, &Subsystem::prefix(d.sites() / 2))
}

/// `S_l` for the prefixes `l = 1..L-1`.
pub fn entropy_profile(d: &CorrelationMatrix) -> Result<Vec<f64>> {
    (1..d.sites())
        .map(|l| entanglement_entropy(d, &Subsystem::prefix(l)))
        .collect()
}

/// `⟨n_i⟩ = Re D_ii`.
pub fn density_profile(d: &CorrelationMatrix) -> Vec<f64> {
    d.matrix.diag().iter().map(|z| z.re).collect()
}

/// `C(l) = |D_{L/2, L/2+l}|²` with 1-based `L/2`, valid for `1 <= l <= L/2`.
pub fn connected_correlation(d: &CorrelationMatrix, l: usize) -> Result<f64> {
    let n = d.sites();
    if l == 0 || l > n / 2 {
        return Err(Error::Domain(format!("correlation distance {l} outside 1..={}", n / 2)));
    }
    let mid = n / 2 - 1;
    Ok(d.matrix[[mid, mid + l]].norm_sqr())
}

/// `C(l)` for every `l = 1..=L/2`.
pub fn correlation_profile(d: &CorrelationMatrix) -> Vec<f64> {
    let mid = d.sites() / 2 - 1;
    (1..=d.sites() / 2)
        .map(|l| d.matrix[[mid, mid + l]].norm_sqr())
        .collect()
}

/// Ring distance `(L/π) sin(lπ/L)`.
pub fn chord_coordinate(l: usize, n: usize) -> f64 {
    let n = n as f64;
    n / std::f64::consts::PI * (l as f64 * std::f64::consts::PI / n).sin()
}

/// `I_AB = S_A + S_B - S_{A∪B}` for disjoint `a`, `b`.
pub fn mutual_information(d: &CorrelationMatrix, a: &Subsystem, b: &Subsystem) -> Result<f64> {
    if !a.is_disjoint(b) {
        return Err(Error::Domain("mutual information needs disjoint subsystems".into()));
    }
    let ab = a.union(b);
    let sa = entanglement_entropy(d, a)?;
    let sb = entanglement_entropy(d, b)?;
    // A∪B spanning everything is a pure state with zero entropy; the
    // eigensolver would return 0/1 up to rounding anyway.
    let sab = if ab.len() == d.sites() {
        0.0
    } else {
        entanglement_entropy(d, &ab)?
    };
    Ok(sa + sb - sab)
}

/// Default mutual-information geometry: the first and last quarter of the chain.
pub fn antipodal_quarters(n: usize) -> (Subsystem, Subsystem) {
    (Subsystem::range(0, n / 4), Subsystem::range(3 * n / 4, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{correlation_matrix, init_neel, SlaterFrame};
    use proptest::prelude::*;

    fn diag(values: &[f64]) -> CorrelationMatrix {
        CorrelationMatrix::new(Array2::from_diag(&ndarray::Array1::from_iter(
            values.iter().map(|&v| C64::new(v, 0.0)),
        )))
    }

    /// Correlation matrix of a random orthonormal frame.
    fn random_state(l: usize, seed: u64) -> CorrelationMatrix {
        let v = crate::model::sample_onsite(2.0, 2 * l * l / 2, seed);
        let m = Array2::from_shape_fn((l, l / 2), |(i, j)| {
            C64::new(v[2 * (i * (l / 2) + j)], v[2 * (i * (l / 2) + j) + 1])
        });
        let (q, _) = crate::evolve::positive_qr(&m).unwrap();
        correlation_matrix(&SlaterFrame {
            orbitals: q,
            step_index: 0,
        })
    }

    #[test]
    fn product_state_has_no_entropy() {
        let d = diag(&[0.0, 1.0, 0.0, 1.0]);
        assert!(entanglement_entropy(&d, &Subsystem::prefix(2)).unwrap() < 1e-9);
    }

    #[test]
    fn bonding_orbital_gives_ln2() {
        let r = 0.5f64.sqrt();
        let mut q = Array2::<C64>::zeros((2, 1));
        q[[0, 0]] = C64::new(r, 0.0);
        q[[1, 0]] = C64::new(r, 0.0);
        let d = correlation_matrix(&SlaterFrame {
            orbitals: q,
            step_index: 0,
        });
        let s = entanglement_entropy(&d, &Subsystem::prefix(1)).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_and_out_of_range_subsystems_rejected() {
        let d = diag(&[0.0, 1.0]);
        assert!(Subsystem::new(vec![], 2).is_err());
        assert!(Subsystem::new(vec![2], 2).is_err());
        assert!(Subsystem::new(vec![1, 1], 2).is_err());
        assert!(entanglement_entropy(&d, &Subsystem::range(0, 0)).is_err());
        assert!(entanglement_entropy(&d, &Subsystem::range(1, 3)).is_err());
    }

    #[test]
    fn neel_density_and_correlations() {
        let d = correlation_matrix(&init_neel(8).unwrap());
        assert_eq!(density_profile(&d), vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        for l in 1..=4 {
            assert_eq!(connected_correlation(&d, l).unwrap(), 0.0);
        }
        assert!(connected_correlation(&d, 0).is_err());
        assert!(connected_correlation(&d, 5).is_err());
        let (a, b) = antipodal_quarters(8);
        assert!(mutual_information(&d, &a, &b).unwrap().abs() < 1e-9);
    }

    #[test]
    fn chord_coordinate_values() {
        let pi = std::f64::consts::PI;
        assert!((chord_coordinate(32, 64) - 64.0 / pi).abs() < 1e-12);
        assert!((chord_coordinate(1, 100_000) - 1.0).abs() < 1e-6);
        assert!((chord_coordinate(5, 64) - chord_coordinate(59, 64)).abs() < 1e-12);
    }

    #[test]
    fn overlapping_subsystems_rejected() {
        let d = random_state(8, 1);
        assert!(mutual_information(&d, &Subsystem::range(0, 3), &Subsystem::range(2, 5)).is_err());
    }

    #[test]
    fn full_cover_mutual_information_is_twice_entropy() {
        let d = random_state(10, 2);
        let a = Subsystem::range(0, 4);
        let b = a.complement(10);
        let i = mutual_information(&d, &a, &b).unwrap();
        let sa = entanglement_entropy(&d, &a).unwrap();
        assert!((i - 2.0 * sa).abs() < 1e-9);
    }

    #[test]
    fn clipping_is_neutral() {
        let d = random_state(16, 3);
        for l in 1..16 {
            let a = Subsystem::prefix(l);
            let s1 = entanglement_entropy_with_clip(&d, &a, 1e-12).unwrap();
            let s2 = entanglement_entropy_with_clip(&d, &a, 5e-13).unwrap();
            assert!((s1 - s2).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pure_state_entropy_laws(seed in 0u64..10_000, half in 2usize..7) {
            let l = 2 * half;
            let d = random_state(l, seed);
            let profile = entropy_profile(&d).unwrap();
            for (k, &s) in profile.iter().enumerate() {
                let len = k + 1;
                prop_assert!(s >= 0.0);
                prop_assert!(s <= len as f64 * 2f64.ln() + 1e-9);
                prop_assert!(s <= (l - len) as f64 * 2f64.ln() + 1e-9);
                let suffix = entanglement_entropy(&d, &Subsystem::range(len, l)).unwrap();
                prop_assert!((s - suffix).abs() < 1e-8);
            }
            let n: f64 = density_profile(&d).iter().sum();
            prop_assert!((n - half as f64).abs() < 1e-10);
            let (a, b) = antipodal_quarters(l);
            prop_assert!(mutual_information(&d, &a, &b).unwrap() >= -1e-8);
            let scattered = Subsystem::new(vec![0, l - 1], l).unwrap();
            let c = Subsystem::new(vec![1, 2], l).unwrap();
            prop_assert!(mutual_information(&d, &scattered, &c).unwrap() >= -1e-8);
            let sa = entanglement_entropy(&d, &scattered).unwrap();
            let sc = entanglement_entropy(&d, &scattered.complement(l)).unwrap();
            prop_assert!((sa - sc).abs() < 1e-8);
        }
    }
}
