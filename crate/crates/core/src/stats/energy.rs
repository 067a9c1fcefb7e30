//! Discrete energy distance between two label samples:
//! `2 E[A != B] - E[A != A'] - E[B != B']`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyEstimator {
    /// Within-sample terms over ordered pairs `i != j`. A sample of one
    /// contributes a within term of 0. Can be negative on finite samples.
    #[default]
    Unbiased,
    /// Within-sample terms over all `n^2` ordered pairs, self-pairs included.
    /// Always `>= 0` and exactly 0 for matching empirical distributions.
    PlugIn,
}

fn counts<T: Ord>(labels: &[T]) -> BTreeMap<&T, u64> {
    let mut m = BTreeMap::new();
    for l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

fn within<T: Ord>(labels: &[T], estimator: EnergyEstimator) -> f64 {
    let n = labels.len() as f64;
    let same: f64 = counts(labels).values().map(|&c| (c * c) as f64).sum();
    match estimator {
        // Pairs i != j with A_i != A_j: n^2 - sum c^2 out of n(n-1).
        EnergyEstimator::Unbiased if labels.len() < 2 => 0.0,
        EnergyEstimator::Unbiased => (n * n - same) / (n * (n - 1.0)),
        EnergyEstimator::PlugIn => 1.0 - same / (n * n),
    }
}

pub fn energy_distance<T: Ord>(a: &[T], b: &[T]) -> Result<f64, StatsError> {
    energy_distance_with(a, b, EnergyEstimator::default())
}

pub fn energy_distance_with<T: Ord>(a: &[T], b: &[T], estimator: EnergyEstimator) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    let ca = counts(a);
    let cb = counts(b);
    let matches: u64 = ca.iter().map(|(l, &c)| c * cb.get(l).copied().unwrap_or(0)).sum();
    let cross = 1.0 - matches as f64 / (a.len() as f64 * b.len() as f64);
    Ok(2.0 * cross - within(a, estimator) - within(b, estimator))
}
