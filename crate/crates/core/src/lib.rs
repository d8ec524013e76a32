//! Entanglement dynamics of disordered Hatano–Nelson chains.
//!
//! A half-filled Néel state is evolved under `e^{-iHt}` for a non-Hermitian
//! single-particle `H`, kept as an orthonormal Slater frame by QR after each
//! step. All observables come from the correlation matrix
//! `D_ij = ⟨c†_i c_j⟩`. On top of that sit disorder-ensemble sweeps, a
//! finite-size-scaling collapse fitter, single-particle spectral diagnostics
//! and brute-force Fock-space oracles.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod collapse;
pub mod ensemble;
pub mod error;
pub mod evolve;
pub mod expm;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod output;
pub mod parallel;
pub mod reference;
pub mod simplex;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use evolve::{CorrelationMatrix, Schedule, SlaterFrame};
pub use model::{Boundary, DisorderRealization, Hamiltonian, ModelParams, C64};
