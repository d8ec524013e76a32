//! Normalized non-unitary evolution of a Slater determinant.
//!
//! The many-body state `e^{-iĤt}|ψ₀⟩/‖·‖` stays a Slater determinant whose
//! orbitals are the columns of `e^{-iHt}U₀`. Those columns grow and decay
//! exponentially for non-Hermitian `H`, so the frame is re-orthonormalized
//! by QR after every step; the triangular factor only rescales the state
//! and is dropped.

use ndarray::{s, Array2, Axis};
use ndarray_linalg::QR;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::model::{build_hamiltonian, DisorderRealization, Hamiltonian, ModelParams, C64};

/// Allowed departure of `Q†Q` from the identity after a step.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// Smallest acceptable `|R_ii|` before the step counts as rank deficient.
pub const MIN_R_DIAG: f64 = 1e-13;

/// Orthonormal single-particle orbitals (columns) of the evolving state.
#[derive(Clone, Debug, PartialEq)]
pub struct SlaterFrame {
    pub orbitals: Array2<C64>,
    pub step_index: usize,
}

impl SlaterFrame {
    pub fn sites(&self) -> usize {
        self.orbitals.nrows()
    }

    pub fn particles(&self) -> usize {
        self.orbitals.ncols()
    }

    /// `max |Q†Q - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let q = &self.orbitals;
        let g = q.t().mapv(|z| z.conj()).dot(q);
        g.indexed_iter()
            .map(|((i, j), z)| {
                if i == j {
                    (z - C64::new(1.0, 0.0)).norm()
                } else {
                    z.norm()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Frame with one particle on each listed (0-based) site.
pub fn init_occupied(l: usize, sites: &[usize]) -> Result<SlaterFrame> {
    let mut q = Array2::<C64>::zeros((l, sites.len()));
    for (col, &site) in sites.iter().enumerate() {
        if site >= l {
            return Err(Error::InvalidParameter(format!(
                "occupied site {site} outside a chain of {l} sites"
            )));
        }
        if q.row(site).iter().any(|z| z.norm() != 0.0) {
            return Err(Error::InvalidParameter(format!("site {site} occupied twice")));
        }
        q[[site, col]] = C64::new(1.0, 0.0);
    }
    Ok(SlaterFrame {
        orbitals: q,
        step_index: 0,
    })
}

/// Néel state: every second site occupied, starting from site 2 in 1-based
/// counting (0-based sites 1, 3, 5, ...).
pub fn init_neel(l: usize) -> Result<SlaterFrame> {
    if !l.is_multiple_of(2) || l == 0 {
        return Err(Error::InvalidParameter(format!(
            "Néel state needs an even number of sites, got {l}"
        )));
    }
    let sites: Vec<usize> = (0..l / 2).map(|j| 2 * j + 1).collect();
    init_occupied(l, &sites)
}

/// One-step propagator `exp(-i H dt)`.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub matrix: Array2<C64>,
    pub dt: f64,
}

pub fn make_propagator(h: &Hamiltonian, dt: f64) -> Result<Propagator> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let generator = h.matrix.mapv(|z| z * C64::new(0.0, -dt));
    Ok(Propagator {
        matrix: expm(&generator)?,
        dt,
    })
}

/// Numerical health of one propagation step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepHealth {
    pub orthonormality_error: f64,
    pub min_r_diag: f64,
}

/// QR with the diagonal of `R` made real and positive.
///
/// Returns the orthonormal factor and `min |R_ii|`.
pub fn positive_qr(a: &Array2<C64>) -> Result<(Array2<C64>, f64)> {
    let (mut q, r) = a.qr()?;
    let mut min_diag = f64::INFINITY;
    for (k, mut col) in q.axis_iter_mut(Axis(1)).enumerate() {
        let d = r[[k, k]];
        let mag = d.norm();
        min_diag = min_diag.min(mag);
        if mag > 0.0 {
            let phase = d / mag;
            col.mapv_inplace(|z| z * phase);
        }
    }
    Ok((q, min_diag))
}

/// Applies the propagator and re-orthonormalizes; also reports step health.
pub fn step_monitored(frame: &SlaterFrame, prop: &Propagator) -> Result<(SlaterFrame, StepHealth)> {
    let step = frame.step_index + 1;
    let moved = prop.matrix.dot(&frame.orbitals);
    let (q, min_r_diag) = positive_qr(&moved)?;
    if !(min_r_diag >= MIN_R_DIAG) {
        return Err(Error::Stabilization {
            step,
            reason: format!("rank deficient frame, min |R_ii| = {min_r_diag:e}"),
        });
    }
    let next = SlaterFrame {
        orbitals: q,
        step_index: step,
    };
    let orthonormality_error = next.orthonormality_error();
    if !(orthonormality_error <= ORTHONORMALITY_TOL) {
        return Err(Error::Stabilization {
            step,
            reason: format!("lost orthonormality, max |Q†Q - I| = {orthonormality_error:e}"),
        });
    }
    Ok((
        next,
        StepHealth {
            orthonormality_error,
            min_r_diag,
        },
    ))
}

pub fn step(frame: &SlaterFrame, prop: &Propagator) -> Result<SlaterFrame> {
    step_monitored(frame, prop).map(|(f, _)| f)
}

/// Two-point function `D_ij = ⟨c†_i c_j⟩` of a Slater determinant.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub matrix: Array2<C64>,
}

impl CorrelationMatrix {
    pub fn new(matrix: Array2<C64>) -> Self {
        CorrelationMatrix { matrix }
    }

    pub fn sites(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().iter().sum()
    }

    /// Mirror image under `i -> L-1-i`.
    pub fn reflected(&self) -> Self {
        CorrelationMatrix {
            matrix: self.matrix.slice(s![..;-1, ..;-1]).to_owned(),
        }
    }

    /// `max |D - D†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = &self.matrix;
        (d - &d.t().mapv(|z| z.conj()))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `max |D² - D|`; zero for a pure Gaussian state.
    pub fn idempotence_error(&self) -> f64 {
        let d = &self.matrix;
        (d.dot(d) - d).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `D = (QQ†)ᵀ`, i.e. `D_ij = Σ_k conj(Q_ik) Q_jk`.
pub fn correlation_matrix(frame: &SlaterFrame) -> CorrelationMatrix {
    let q = &frame.orbitals;
    CorrelationMatrix {
        matrix: q.mapv(|z| z.conj()).dot(&q.t()),
    }
}

/// Time grid of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub dt: f64,
    pub n_steps: usize,
    pub record_last: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            dt: 2.0,
            n_steps: 1000,
            record_last: 100,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.record_last == 0 || self.record_last > self.n_steps {
            return Err(Error::InvalidParameter(format!(
                "need n_steps >= record_last >= 1, got n_steps = {}, record_last = {}",
                self.n_steps, self.record_last
            )));
        }
        Ok(())
    }

    /// First step index whose state is recorded.
    pub fn first_recorded(&self) -> usize {
        self.n_steps - self.record_last + 1
    }
}

/// Worst-case health over a whole trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHealth {
    pub max_orthonormality_error: f64,
    pub min_r_diag: f64,
    pub reflected: bool,
}

/// Evolves the Néel state and hands each recorded correlation matrix to `visit`
/// together with its step index.
///
/// Open chains with `γ > 0` are evolved as their mirror image (with the
/// mirrored Néel pattern) and every recorded `D` is mirrored back, so the
/// caller always sees the requested geometry.
pub fn evolve_trajectory_with<F>(
    params: &ModelParams,
    dis: &DisorderRealization,
    schedule: &Schedule,
    mut visit: F,
) -> Result<TrajectoryHealth>
where
    F: FnMut(usize, &CorrelationMatrix),
{
    schedule.validate()?;
    let reflected = params.needs_reflection();
    let (p, d) = if reflected {
        (params.reflected(), dis.reflected())
    } else {
        (*params, dis.clone())
    };
    let h = build_hamiltonian(&p, &d)?;
    let prop = make_propagator(&h, schedule.dt)?;

    let l = p.l;
    let mut frame = if reflected {
        let sites: Vec<usize> = (0..l / 2).map(|j| l - 2 - 2 * j).collect();
        init_occupied(l, &sites)?
    } else {
        init_neel(l)?
    };

    let mut health = TrajectoryHealth {
        max_orthonormality_error: 0.0,
        min_r_diag: f64::INFINITY,
        reflected,
    };
    let first = schedule.first_recorded();
    for _ in 0..schedule.n_steps {
        let (next, h) = step_monitored(&frame, &prop)?;
        frame = next;
        health.max_orthonormality_error = health.max_orthonormality_error.max(h.orthonormality_error);
        health.min_r_diag = health.min_r_diag.min(h.min_r_diag);
        if frame.step_index >= first {
            let dm = correlation_matrix(&frame);
            if reflected {
                visit(frame.step_index, &dm.reflected());
            } else {
                visit(frame.step_index, &dm);
            }
        }
    }
    Ok(health)
}

/// Correlation matrices at the last `record_last` steps.
pub fn evolve_trajectory(
    params: &ModelParams,
    dis: &DisorderRealization,
    schedule: &Schedule,
) -> Result<Vec<CorrelationMatrix>> {
    let mut out = Vec::with_capacity(schedule.record_last);
    evolve_trajectory_with(params, dis, schedule, |_, d| out.push(d.clone()))?;
    Ok(out)
}
