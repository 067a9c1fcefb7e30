//! Simple least-squares line with Pearson correlation.

use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub n: usize,
}

/// Fit `td = intercept + slope * energy` over `(energy, td)` points.
pub fn energy_td_regression(points: &[(f64, f64)]) -> Result<LineFit, StatsError> {
    if points.len() < 2 {
        return Err(StatsError::InvalidParameter("need at least 2 points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= f64::EPSILON * n * mx.abs().max(1.0) {
        return Err(StatsError::DegenerateVariance("x is constant"));
    }
    let slope = sxy / sxx;
    let correlation = if syy == 0.0 { 0.0 } else { sxy / (sxx * syy).sqrt() };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        correlation: correlation.clamp(-1.0, 1.0),
        n: points.len(),
    })
}
