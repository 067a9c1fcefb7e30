//! Linear probability model: OLS with White (HC0) robust covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpmOptions {
    /// Column holding the intercept; excluded from the Bonferroni family.
    pub intercept_column: Option<usize>,
    /// Bonferroni divisor. Defaults to the number of non-intercept columns.
    pub n_tests: Option<u32>,
    /// Reject responses outside {0, 1}.
    pub binary_response: bool,
    /// Relative threshold on `|R_jj|` below which a column counts as dependent.
    pub rank_tolerance: f64,
    #[serde(default)]
    pub names: Vec<String>,
}

impl Default for LpmOptions {
    fn default() -> Self {
        LpmOptions {
            intercept_column: Some(0),
            n_tests: None,
            binary_response: true,
            rank_tolerance: 1e-10,
            names: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpmFit {
    pub names: Vec<String>,
    pub beta_hat: Vec<f64>,
    pub robust_covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub z_scores: Vec<f64>,
    /// Two-sided normal p-values before adjustment.
    pub raw_p_values: Vec<f64>,
    /// Bonferroni-adjusted p-values; the intercept is left unadjusted.
    pub p_values: Vec<f64>,
    pub n_tests: u32,
    pub n: usize,
    /// Fraction of rows whose fitted value falls outside [0, 1].
    pub fitted_outside_unit: f64,
}

impl LpmFit {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((self.beta_hat[j], self.p_values[j]))
    }
}

/// Two-sided standard normal tail, `Pr(|Z| >= |z|)`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

pub fn fit_lpm(x: &[Vec<f64>], y: &[f64]) -> Result<LpmFit, StatsError> {
    fit_lpm_with(x, y, &LpmOptions::default())
}

pub fn fit_lpm_with(x: &[Vec<f64>], y: &[f64], options: &LpmOptions) -> Result<LpmFit, StatsError> {
    let n = x.len();
    if n == 0 {
        return Err(StatsError::Empty);
    }
    if y.len() != n {
        return Err(StatsError::LengthMismatch { left: n, right: y.len() });
    }
    let p = x[0].len();
    if p == 0 {
        return Err(StatsError::InvalidParameter("design matrix has no columns".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != p) {
        return Err(StatsError::DimensionMismatch { expected: p, found: row.len() });
    }
    if n < p {
        return Err(StatsError::RankDeficient { column: n });
    }
    if options.binary_response {
        if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(StatsError::InvalidParameter(format!("response {v} is not binary")));
        }
    }
    if !options.names.is_empty() && options.names.len() != p {
        return Err(StatsError::DimensionMismatch { expected: p, found: options.names.len() });
    }

    let xm = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    for j in 0..p {
        let pivot = r[(j, j)].abs();
        if pivot.is_nan() || pivot <= options.rank_tolerance * scale.max(1.0) {
            return Err(StatsError::RankDeficient { column: j });
        }
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(StatsError::RankDeficient { column: p - 1 })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(StatsError::RankDeficient { column: p - 1 })?;
    // (X'X)^-1 = R^-1 R^-T
    let bread = &r_inv * r_inv.transpose();

    let fitted = &xm * &beta;
    let resid = &yv - &fitted;
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        let row = xm.row(i);
        let w = resid[i] * resid[i];
        meat += row.transpose() * row * w;
    }
    let mut cov = &bread * meat * &bread;
    // Remove rounding asymmetry.
    cov = (&cov + cov.transpose()) * 0.5;

    let intercept = options.intercept_column.filter(|&c| c < p);
    let n_tests = options
        .n_tests
        .unwrap_or((p - usize::from(intercept.is_some())).max(1) as u32);
    let mut std_errors = Vec::with_capacity(p);
    let mut z_scores = Vec::with_capacity(p);
    let mut raw = Vec::with_capacity(p);
    let mut adjusted = Vec::with_capacity(p);
    for j in 0..p {
        let var = cov[(j, j)].max(0.0);
        let se = var.sqrt();
        let b = beta[j];
        let z = if se > 0.0 {
            b / se
        } else if b == 0.0 {
            0.0
        } else {
            b.signum() * f64::INFINITY
        };
        let pv = normal_two_sided_p(z);
        std_errors.push(se);
        z_scores.push(z);
        raw.push(pv);
        adjusted.push(if Some(j) == intercept { pv } else { (pv * f64::from(n_tests)).min(1.0) });
    }

    let outside = fitted.iter().filter(|&&f| !(0.0..=1.0).contains(&f)).count();
    let names = if options.names.is_empty() {
        (0..p).map(|j| format!("x{j}")).collect()
    } else {
        options.names.clone()
    };
    Ok(LpmFit {
        names,
        beta_hat: beta.iter().copied().collect(),
        robust_covariance: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        std_errors,
        z_scores,
        raw_p_values: raw,
        p_values: adjusted,
        n_tests,
        n,
        fitted_outside_unit: outside as f64 / n as f64,
    })
}

#[cfg(test)]
mod unit {
    use super::*;
    use crate::model::seeded_rng;
    use rand::Rng;

    fn continuous() -> LpmOptions {
        LpmOptions { binary_response: false, ..LpmOptions::default() }
    }

    #[test]
    fn perfect_fit() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.5];
        let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![1.0, v]).collect();
        let fit = fit_lpm_with(&x, &xs, &continuous()).unwrap();
        assert!(fit.beta_hat[0].abs() < 1e-12);
        assert!((fit.beta_hat[1] - 1.0).abs() < 1e-12);
        assert!(fit.robust_covariance.iter().flatten().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn two_group_means() {
        // Binary regressor: beta = (mean of group 0, difference of means).
        let x = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        let y = vec![0.0, 1.0, 1.0, 1.0, 0.0];
        let fit = fit_lpm(&x, &y).unwrap();
        assert!((fit.beta_hat[0] - 0.5).abs() < 1e-12);
        assert!((fit.beta_hat[1] - (2.0 / 3.0 - 0.5)).abs() < 1e-12);
        // HC0 variance of a group mean: sum of squared residuals / n_g^2
        assert!((fit.robust_covariance[0][0] - 0.5 / 4.0).abs() < 1e-12);
        let v1 = 0.5 / 4.0 + (2.0 / 3.0) / 9.0;
        assert!((fit.robust_covariance[1][1] - v1).abs() < 1e-12);
        assert_eq!(fit.n_tests, 1);
    }

    #[test]
    fn orthogonality_and_symmetry() {
        let mut rng = seeded_rng(3);
        let x: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![1.0, rng.random_range(0.0..1.0), f64::from(u8::from(rng.random_bool(0.3)))])
            .collect();
        let y: Vec<f64> = (0..400).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
        let fit = fit_lpm(&x, &y).unwrap();
        for j in 0..3 {
            let g: f64 = (0..400)
                .map(|i| {
                    let f: f64 = (0..3).map(|k| x[i][k] * fit.beta_hat[k]).sum();
                    x[i][j] * (y[i] - f)
                })
                .sum();
            assert!(g.abs() < 1e-8);
            assert!(fit.robust_covariance[j][j] >= 0.0);
            for k in 0..3 {
                assert_eq!(fit.robust_covariance[j][k], fit.robust_covariance[k][j]);
            }
        }
        assert_eq!(fit.n_tests, 2);
        for j in 1..3 {
            assert!(fit.p_values[j] >= fit.raw_p_values[j]);
        }
    }

    #[test]
    fn rank_deficiency_detected() {
        let x = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        assert!(matches!(fit_lpm(&x, &[0.0, 1.0, 1.0]), Err(StatsError::RankDeficient { column: 1 })));
        let x = vec![vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]];
        assert!(matches!(fit_lpm(&x, &[0.0, 1.0, 1.0, 0.0]), Err(StatsError::RankDeficient { .. })));
    }

    #[test]
    fn input_validation() {
        let x = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        assert!(matches!(fit_lpm(&x, &[0.0, 1.0]), Err(StatsError::LengthMismatch { .. })));
        assert!(fit_lpm(&x, &[0.0, 0.5, 1.0]).is_err());
    }

    #[test]
    fn normal_tail() {
        assert!((normal_two_sided_p(1.959964) - 0.05).abs() < 1e-6);
        assert_eq!(normal_two_sided_p(0.0), 1.0);
        assert_eq!(normal_two_sided_p(f64::INFINITY), 0.0);
    }
}
