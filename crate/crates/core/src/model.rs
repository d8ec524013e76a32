//! Disordered Hatano–Nelson chains.
//!
//! The single-particle matrix follows `Ĥ = Σ_ij H_ij c†_i c_j` with
//! `H_{i,i+1} = J_L = -(J-γ)/2`, `H_{i+1,i} = J_R = -(J+γ)/2` and on-site
//! energies `m_i` drawn uniformly from `[-W/2, W/2]`. Indices are 0-based in
//! code; periodic chains close the ring with `H_{L-1,0} = J_L` and
//! `H_{0,L-1} = J_R`.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Open => f.write_str("open"),
            Boundary::Periodic => f.write_str("periodic"),
        }
    }
}

/// Static parameters of one chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Symmetric hopping scale.
    pub j: f64,
    /// Asymmetric hopping strength.
    pub gamma: f64,
    /// Disorder strength; on-site energies live in `[-w/2, w/2]`.
    pub w: f64,
    /// Number of sites (even, at least 4).
    pub l: usize,
    pub boundary: Boundary,
}

impl ModelParams {
    pub fn new(j: f64, gamma: f64, w: f64, l: usize, boundary: Boundary) -> Result<Self> {
        let p = ModelParams {
            j,
            gamma,
            w,
            l,
            boundary,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 4 || !self.l.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "L must be even and at least 4, got {}",
                self.l
            )));
        }
        if !(self.j.is_finite() && self.gamma.is_finite() && self.w.is_finite()) {
            return Err(Error::InvalidParameter("J, gamma and W must be finite".into()));
        }
        if self.w < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "W must be non-negative, got {}",
                self.w
            )));
        }
        Ok(())
    }

    /// `J_L`, the amplitude of `c†_i c_{i+1}`.
    pub fn hop_left(&self) -> f64 {
        -(self.j - self.gamma) / 2.0
    }

    /// `J_R`, the amplitude of `c†_{i+1} c_i`.
    pub fn hop_right(&self) -> f64 {
        -(self.j + self.gamma) / 2.0
    }

    /// Half filling.
    pub fn particles(&self) -> usize {
        self.l / 2
    }

    /// Parameters of the mirror image `i -> L-1-i`, which swaps `J_L` and `J_R`.
    pub fn reflected(&self) -> Self {
        ModelParams {
            gamma: -self.gamma,
            ..*self
        }
    }

    /// Whether production runs should evolve the mirrored chain instead.
    ///
    /// Open chains with `γ > 0` push every column of the frame toward the
    /// right edge, where repeated QR loses orthogonality; the mirror image
    /// has `γ < 0` and identical physics.
    pub fn needs_reflection(&self) -> bool {
        self.boundary == Boundary::Open && self.gamma > 0.0
    }
}

/// One draw of on-site energies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub onsite: Vec<f64>,
    pub seed: u64,
}

impl DisorderRealization {
    pub fn clean(l: usize) -> Self {
        DisorderRealization {
            onsite: vec![0.0; l],
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.onsite.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsite.is_empty()
    }

    pub fn reflected(&self) -> Self {
        DisorderRealization {
            onsite: self.onsite.iter().rev().copied().collect(),
            seed: self.seed,
        }
    }
}

/// Draws `n` i.i.d. uniform energies on `[-w/2, w/2]` from a ChaCha8 stream.
pub fn sample_onsite(w: f64, n: usize, seed: u64) -> Vec<f64> {
    if w == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| w * (rng.random::<f64>() - 0.5)).collect()
}

pub fn sample_disorder(params: &ModelParams, seed: u64) -> DisorderRealization {
    DisorderRealization {
        onsite: sample_onsite(params.w, params.l, seed),
        seed,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds 64-bit words into one well-mixed key.
pub fn mix_seed(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Seed of realization `r` at grid point `(γ, W, L)`.
///
/// Keyed on the bit patterns of `γ` and `W` rather than grid positions, so a
/// point draws the same ensemble whatever grid it appears in.
pub fn realization_seed(base_seed: u64, l: usize, w: f64, gamma: f64, r: u64) -> u64 {
    mix_seed(&[base_seed, l as u64, w.to_bits(), gamma.to_bits(), r])
}

/// Dense single-particle matrix together with the parameters it came from.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub matrix: Array2<C64>,
    pub params: ModelParams,
}

impl Hamiltonian {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    /// Whether every entry is real and the matrix is symmetric.
    pub fn is_hermitian(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| (self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm() == 0.0))
    }
}

pub fn build_hamiltonian(params: &ModelParams, dis: &DisorderRealization) -> Result<Hamiltonian> {
    params.validate()?;
    let l = params.l;
    if dis.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            found: dis.len(),
        });
    }
    let jl = C64::new(params.hop_left(), 0.0);
    let jr = C64::new(params.hop_right(), 0.0);
    let mut h = Array2::<C64>::zeros((l, l));
    for i in 0..l {
        h[[i, i]] = C64::new(dis.onsite[i], 0.0);
    }
    for i in 0..l - 1 {
        h[[i, i + 1]] = jl;
        h[[i + 1, i]] = jr;
    }
    if params.boundary == Boundary::Periodic {
        h[[l - 1, 0]] = jl;
        h[[0, l - 1]] = jr;
    }
    Ok(Hamiltonian {
        matrix: h,
        params: *params,
    })
}

/// Imaginary-gauge data mapping an open chain to a Hermitian one.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityData {
    /// `|(J+γ)/(J-γ)|`.
    pub r: f64,
    /// Hermitian hopping `sgn(J)·sqrt(J²-γ²)`.
    pub j_prime: f64,
    /// Diagonal of `S`, entry `i` (0-based) is `r^{(i+1)/2}`.
    pub scale: Vec<f64>,
}

impl SimilarityData {
    /// `ln S_ii`, safe when `scale` itself under- or overflows.
    pub fn log_scale(&self, i: usize) -> f64 {
        0.5 * (i as f64 + 1.0) * self.r.ln()
    }

    /// Parameters of the Hermitian partner `H(J -> J', γ -> 0)`.
    pub fn hermitian_params(&self, params: &ModelParams) -> ModelParams {
        ModelParams {
            j: self.j_prime,
            gamma: 0.0,
            ..*params
        }
    }
}

pub fn similarity_transform(params: &ModelParams) -> Result<SimilarityData> {
    let (j, g) = (params.j, params.gamma);
    if g.abs() >= j.abs() {
        return Err(Error::Domain(format!(
            "similarity transform needs |gamma| < |J| (gamma = {g}, J = {j})"
        )));
    }
    let r = ((j + g) / (j - g)).abs();
    let j_prime = j.signum() * (j * j - g * g).sqrt();
    let scale = (0..params.l).map(|i| r.powf((i as f64 + 1.0) / 2.0)).collect();
    Ok(SimilarityData { r, j_prime, scale })
}

/// `S⁻¹ H S` evaluated entry by entry from `H`.
pub fn transformed_matrix(h: &Hamiltonian, sim: &SimilarityData) -> Array2<C64> {
    let n = h.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let z = h.matrix[[i, j]];
        if z == C64::new(0.0, 0.0) {
            z
        } else {
            z * (sim.log_scale(j) - sim.log_scale(i)).exp()
        }
    })
}

/// The Hermitian partner `H'` of an open chain, built directly with hopping `J'`.
pub fn hermitian_partner(params: &ModelParams, dis: &DisorderRealization) -> Result<Hamiltonian> {
    if params.boundary != Boundary::Open {
        return Err(Error::Domain(
            "the imaginary-gauge transform only applies to open chains".into(),
        ));
    }
    let sim = similarity_transform(params)?;
    build_hamiltonian(&sim.hermitian_params(params), dis)
}
