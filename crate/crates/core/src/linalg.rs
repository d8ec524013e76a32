//! Thin wrappers over LAPACK routines that need care with memory layout.

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::Result;
use crate::model::C64;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// Hermitian matrix.
///
/// `ndarray-linalg` hands row-major complex input to `zheev` as its
/// transpose, which returns the conjugated eigenvectors. A column-major copy
/// sidesteps that.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let mut f = Array2::<C64>::zeros(a.raw_dim().f());
    f.assign(a);
    Ok(f.eigh(UPLO::Lower)?)
}

/// Same as [`eigh`] for a real symmetric matrix.
pub fn symmetric_eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let mut f = Array2::<f64>::zeros(a.raw_dim().f());
    f.assign(a);
    Ok(f.eigh(UPLO::Lower)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_is_small_for_row_major_input() {
        let n = 7;
        let v = crate::model::sample_onsite(2.0, 2 * n * n, 3);
        let r = Array2::from_shape_fn((n, n), |(i, j)| C64::new(v[2 * (i * n + j)], v[2 * (i * n + j) + 1]));
        let h = (&r + &r.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let (w, u) = eigh(&h).unwrap();
        let lam = Array2::from_diag(&w.mapv(|x| C64::new(x, 0.0)));
        let res = h.dot(&u) - u.dot(&lam);
        assert!(res.iter().all(|z| z.norm() < 1e-12));
    }
}
