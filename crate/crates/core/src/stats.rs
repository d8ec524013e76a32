//! Small statistics helpers shared by the ensemble, spectral and collapse code.

use serde::{Deserialize, Serialize};

/// Welford accumulator for a scalar.
#[derive(Clone, Copy, Debug, Default)]
pub struct Running {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn summary(&self) -> Estimate {
        Estimate {
            mean: self.mean(),
            std_err: self.std_err(),
        }
    }
}

/// Welford accumulator for equal-length vectors.
#[derive(Clone, Debug, Default)]
pub struct RunningVec {
    parts: Vec<Running>,
}

impl RunningVec {
    pub fn push(&mut self, xs: &[f64]) {
        if self.parts.is_empty() {
            self.parts = vec![Running::default(); xs.len()];
        }
        assert_eq!(self.parts.len(), xs.len(), "vector length changed mid-stream");
        for (acc, &x) in self.parts.iter_mut().zip(xs) {
            acc.push(x);
        }
    }

    pub fn summary(&self) -> VecEstimate {
        VecEstimate {
            mean: self.parts.iter().map(Running::mean).collect(),
            std_err: self.parts.iter().map(Running::std_err).collect(),
        }
    }
}

/// Mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VecEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero below two samples.
pub fn sample_std(xs: &[f64]) -> f64 {
    let mut r = Running::default();
    xs.iter().for_each(|&x| r.push(x));
    r.variance().sqrt()
}

/// Ordinary least squares `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual scatter; zero for two points.
    pub slope_err: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LineFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_err = if points.len() > 2 {
        let rss: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        slope_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25];
        let mut r = Running::default();
        xs.iter().for_each(|&x| r.push(x));
        assert!((r.mean() - mean(&xs)).abs() < 1e-14);
        let m = mean(&xs);
        let two_pass = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!((r.variance() - two_pass).abs() < 1e-13);
        assert!((r.variance().sqrt() - sample_std(&xs)).abs() < 1e-14);
        assert!((r.std_err() - sample_std(&xs) / 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn identical_samples_have_zero_error() {
        let mut r = Running::default();
        r.push(0.3);
        r.push(0.3);
        assert_eq!(r.std_err(), 0.0);
        let mut one = Running::default();
        one.push(1.0);
        assert_eq!(one.std_err(), 0.0);
        assert_eq!(sample_std(&[0.1 + 0.2; 3]), 0.0);
    }

    #[test]
    fn line_fit_exact() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 - 1.0)).collect();
        let f = linear_fit(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!(linear_fit(&[(1.0, 1.0)]).is_none());
        assert!(linear_fit(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }
}
