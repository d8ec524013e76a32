//! Dense complex matrix exponential by scaling and squaring with diagonal
//! Padé approximants (degrees 3, 5, 7, 9, 13 chosen from the 1-norm).
//!
//! Thresholds and coefficients follow Higham, "The scaling and squaring
//! method for the matrix exponential revisited" (SIAM J. Matrix Anal. Appl.
//! 26, 2005). Backward error is bounded by the unit roundoff.

use ndarray::Array2;
use ndarray_linalg::{FactorizeInto, Solve};

use crate::error::Result;
use crate::model::C64;

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
    (13, 5.371_920_351_148_152e0),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Maximum absolute column sum.
pub fn norm1(a: &Array2<C64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

fn scaled(a: &Array2<C64>, s: f64) -> Array2<C64> {
    a.mapv(|z| z * s)
}

/// `Σ_k coef[k] · pow[k]` over the supplied even powers.
fn combine(coef: &[f64], pows: &[&Array2<C64>]) -> Array2<C64> {
    let mut acc = scaled(pows[0], coef[0]);
    for (c, p) in coef.iter().zip(pows.iter()).skip(1) {
        acc.scaled_add(C64::new(*c, 0.0), *p);
    }
    acc
}

/// Odd (`u`) and even (`v`) parts of the degree-`m` Padé numerator for `m < 13`.
fn pade_low(a: &Array2<C64>, b: &[f64]) -> (Array2<C64>, Array2<C64>) {
    let n = a.nrows();
    let eye = identity(n);
    let half = b.len() / 2;
    let mut pows = vec![eye];
    let a2 = a.dot(a);
    for k in 1..half {
        let next = pows[k - 1].dot(&a2);
        pows.push(next);
    }
    let refs: Vec<&Array2<C64>> = pows.iter().collect();
    let odd: Vec<f64> = (0..half).map(|k| b[2 * k + 1]).collect();
    let even: Vec<f64> = (0..half).map(|k| b[2 * k]).collect();
    let u = a.dot(&combine(&odd, &refs));
    let v = combine(&even, &refs);
    (u, v)
}

fn pade13(a: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let n = a.nrows();
    let b = &B13;
    let eye = identity(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let inner_u = combine(&[b[9], b[11], b[13]], &[&a2, &a4, &a6]);
    let u = a.dot(&(a6.dot(&inner_u) + combine(&[b[1], b[3], b[5], b[7]], &[&eye, &a2, &a4, &a6])));
    let inner_v = combine(&[b[8], b[10], b[12]], &[&a2, &a4, &a6]);
    let v = a6.dot(&inner_v) + combine(&[b[0], b[2], b[4], b[6]], &[&eye, &a2, &a4, &a6]);
    (u, v)
}

/// `(v - u)⁻¹ (v + u)` column by column.
fn pade_quotient(u: &Array2<C64>, v: &Array2<C64>) -> Result<Array2<C64>> {
    let p = v + u;
    let q = v - u;
    let n = q.nrows();
    let lu = q.factorize_into()?;
    let mut out = Array2::<C64>::zeros((n, n));
    for (j, col) in p.columns().into_iter().enumerate() {
        let x = lu.solve(&col.to_owned())?;
        out.column_mut(j).assign(&x);
    }
    Ok(out)
}

/// `exp(a)` for a square complex matrix.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let norm = norm1(a);
    if norm == 0.0 {
        return Ok(identity(n));
    }

    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            let (u, v) = match m {
                3 => pade_low(a, &B3),
                5 => pade_low(a, &B5),
                7 => pade_low(a, &B7),
                _ => pade_low(a, &B9),
            };
            return pade_quotient(&u, &v);
        }
    }

    let theta13 = THETA[4].1;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a_s = scaled(a, 2f64.powi(-s));
    let (u, v) = pade13(&a_s);
    let mut x = pade_quotient(&u, &v)?;
    for _ in 0..s {
        x = x.dot(&x);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(a: &Array2<C64>) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn taylor(a: &Array2<C64>, terms: usize) -> Array2<C64> {
        let n = a.nrows();
        let mut out = identity(n);
        let mut term = identity(n);
        for k in 1..terms {
            term = term.dot(a).mapv(|z| z / k as f64);
            out += &term;
        }
        out
    }

    fn random_matrix(n: usize, scale: f64, seed: u64) -> Array2<C64> {
        let v = crate::model::sample_onsite(2.0 * scale, 2 * n * n, seed);
        Array2::from_shape_fn((n, n), |(i, j)| C64::new(v[2 * (i * n + j)], v[2 * (i * n + j) + 1]))
    }

    #[test]
    fn zero_gives_identity() {
        let z = Array2::<C64>::zeros((5, 5));
        assert_eq!(expm(&z).unwrap(), identity(5));
    }

    #[test]
    fn two_site_closed_form() {
        // exp(-i H t), H = [[0,-1/2],[-1/2,0]], t = 2.
        let h = Array2::from_shape_vec(
            (2, 2),
            vec![
                C64::new(0.0, 0.0),
                C64::new(-0.5, 0.0),
                C64::new(-0.5, 0.0),
                C64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let p = expm(&h.mapv(|z| z * C64::new(0.0, -2.0))).unwrap();
        let (c, s) = (1f64.cos(), 1f64.sin());
        let want = [
            [C64::new(c, 0.0), C64::new(0.0, s)],
            [C64::new(0.0, s), C64::new(c, 0.0)],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((p[[i, j]] - want[i][j]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn each_pade_degree_matches_taylor() {
        // Norms straddling every threshold, small enough for a long Taylor sum.
        for (k, target) in [0.01, 0.2, 0.8, 1.9, 4.0, 9.0].iter().enumerate() {
            let a0 = random_matrix(6, 1.0, k as u64);
            let a = a0.mapv(|z| z * (target / norm1(&a0)));
            let e = expm(&a).unwrap();
            let t = taylor(&a, 80);
            let rel = max_abs(&(&e - &t)) / max_abs(&t);
            assert!(rel < 1e-13, "norm {target}: rel {rel}");
        }
    }

    #[test]
    fn hermitian_generator_matches_spectral_route() {
        let n = 24;
        let r = random_matrix(n, 1.5, 42);
        let h = (&r + &r.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let (w, v) = crate::linalg::eigh(&h).unwrap();
        let dt = 2.0;
        let phases = Array2::from_diag(&w.mapv(|e| C64::new(0.0, -e * dt).exp()));
        let want = v.dot(&phases).dot(&v.t().mapv(|z| z.conj()));
        let got = expm(&h.mapv(|z| z * C64::new(0.0, -dt))).unwrap();
        let err = max_abs(&(&got - &want));
        assert!(err < 1e-12, "{err}");
        let unit = got.t().mapv(|z| z.conj()).dot(&got) - identity(n);
        assert!(max_abs(&unit) < 1e-12);
    }

    #[test]
    fn semigroup_property() {
        let a = random_matrix(10, 1.0, 9).mapv(|z| z * 0.7);
        let full = expm(&a.mapv(|z| z * 2.0)).unwrap();
        let half = expm(&a).unwrap();
        let rel = max_abs(&(&full - &half.dot(&half))) / max_abs(&full);
        assert!(rel < 1e-12, "{rel}");
    }
}
