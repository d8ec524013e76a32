//! Nelder–Mead downhill simplex.
//!
//! Standard coefficients (reflection 1, expansion 2, contraction 1/2,
//! shrink 1/2). Non-finite objective values are treated as `+∞`, so the
//! simplex simply backs away from them.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Stop when the spread of objective values over the simplex falls
    /// below `tolerance · (|f_best| + tolerance)` and the vertices coincide
    /// to the same relative tolerance.
    pub tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: 2000,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `f` starting from `x0`, with the initial simplex spanned by
/// `x0 + step_i · e_i`.
pub fn minimize<F>(f: F, x0: &[f64], steps: &[f64], opts: &SimplexOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(n, steps.len(), "one initial step per coordinate");
    let eval = |x: &[f64]| sanitize(f(x));

    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    verts.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if steps[i] != 0.0 { steps[i] } else { 2.5e-4 };
        verts.push(v);
    }
    let mut vals: Vec<f64> = verts.iter().map(|v| eval(v)).collect();

    let point = |c: &[f64], d: &[f64], t: f64| -> Vec<f64> { c.iter().zip(d).map(|(a, b)| a + t * (b - a)).collect() };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        verts = order.iter().map(|&i| verts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let (best, worst) = (vals[0], vals[n]);
        let tol = opts.tolerance;
        let f_spread = (worst - best).abs();
        let x_spread = verts[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&verts[0]).map(|(a, b)| (a - b).abs() / (b.abs() + tol)))
            .fold(0.0, f64::max);
        if best.is_finite() && f_spread <= tol * (best.abs() + tol) && x_spread <= tol.sqrt() {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| verts[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let reflected = point(&centroid, &verts[n], -1.0);
        let f_r = eval(&reflected);
        if f_r < vals[0] {
            let expanded = point(&centroid, &verts[n], -2.0);
            let f_e = eval(&expanded);
            if f_e < f_r {
                verts[n] = expanded;
                vals[n] = f_e;
            } else {
                verts[n] = reflected;
                vals[n] = f_r;
            }
            continue;
        }
        if f_r < vals[n - 1] {
            verts[n] = reflected;
            vals[n] = f_r;
            continue;
        }
        let (contracted, f_c) = if f_r < vals[n] {
            let c = point(&centroid, &reflected, 0.5);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = point(&centroid, &verts[n], 0.5);
            let fc = eval(&c);
            (c, fc)
        };
        if f_c < vals[n].min(f_r) {
            verts[n] = contracted;
            vals[n] = f_c;
            continue;
        }
        for i in 1..=n {
            verts[i] = point(&verts[0], &verts[i], 0.5);
            vals[i] = eval(&verts[i]);
        }
    }

    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Minimum {
        x: verts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iterations: 5000,
            tolerance: 1e-12,
        };
        let m = minimize(f, &[-1.2, 1.0], &[0.1, 0.1], &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
    }

    #[test]
    fn quadratic_bowl_three_dimensions() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2) + 0.5 * (x[2] - 0.5).powi(2);
        let m = minimize(f, &[0.0, 0.0, 0.0], &[0.5, 0.5, 0.5], &SimplexOptions::default());
        assert!(m.value < 1e-10);
        assert!((m.x[0] - 3.0).abs() < 1e-4 && (m.x[1] + 1.0).abs() < 1e-4 && (m.x[2] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn walls_of_infinity_are_avoided() {
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.2).powi(2)
            }
        };
        let m = minimize(f, &[1.0], &[0.5], &SimplexOptions::default());
        assert!((m.x[0] - 0.2).abs() < 1e-4);
        let nan = |_: &[f64]| f64::NAN;
        assert_eq!(
            minimize(nan, &[1.0], &[0.5], &SimplexOptions::default()).value,
            f64::INFINITY
        );
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iterations: 5,
            tolerance: 1e-12,
        };
        let m = minimize(f, &[-1.2, 1.0], &[0.1, 0.1], &opts);
        assert!(!m.converged);
        assert_eq!(m.iterations, 5);
    }
}
