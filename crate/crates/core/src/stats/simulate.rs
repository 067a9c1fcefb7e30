//! Agreement-controlled simulation of human outcomes and the rho sweep.
//!
//! `H_i` copies the LM outcome with probability `rho`, otherwise it is
//! `Bernoulli(q)` with `q = (mu - rho * E[h_lm]) / (1 - rho)`, so that
//! `Pr(H_i = 1) = mu` whatever `rho` is.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::profile::{in_bucket, ScoredItem};
use super::tests::{means_test, td_test};
use super::{check_alpha, check_binary, StatsError};
use crate::model::{sub_rng, TestMode};

/// Which expectation of the LM outcome enters `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmExpectation {
    /// Empirical mean of the supplied LM outcomes.
    Empirical,
    /// A known population mean.
    Population(f64),
    /// Per-item expectations, one per outcome.
    PerItem(Vec<f64>),
}

fn bernoulli_q(mu: f64, rho: f64, expectation: f64) -> Result<f64, StatsError> {
    let q = (mu - rho * expectation) / (1.0 - rho);
    // Tolerate rounding noise at the edges.
    if !(-1e-12..=1.0 + 1e-12).contains(&q) || !q.is_finite() {
        return Err(StatsError::Infeasible(format!(
            "q = {q:.4} for mu = {mu}, rho = {rho}, E[h] = {expectation:.4}"
        )));
    }
    Ok(q.clamp(0.0, 1.0))
}

/// Simulate one human sample with the empirical LM mean in `q`.
pub fn simulate_human(lm: &[u8], rho: f64, mu: f64, seed: u64) -> Result<Vec<u8>, StatsError> {
    let mut rng = crate::model::seeded_rng(seed);
    simulate_human_with(lm, rho, mu, &LmExpectation::Empirical, &mut rng)
}

pub fn simulate_human_with<R: Rng + ?Sized>(
    lm: &[u8],
    rho: f64,
    mu: f64,
    expectation: &LmExpectation,
    rng: &mut R,
) -> Result<Vec<u8>, StatsError> {
    if lm.is_empty() {
        return Err(StatsError::Empty);
    }
    check_binary(lm)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(StatsError::InvalidParameter(format!("rho {rho} not in [0,1]")));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(StatsError::InvalidParameter(format!("mu {mu} not in (0,1)")));
    }
    if rho == 1.0 {
        return Ok(lm.to_vec());
    }
    let qs: Vec<f64> = match expectation {
        LmExpectation::Empirical => {
            let mean = lm.iter().map(|&h| f64::from(h)).sum::<f64>() / lm.len() as f64;
            vec![bernoulli_q(mu, rho, mean)?; lm.len()]
        }
        LmExpectation::Population(mean) => vec![bernoulli_q(mu, rho, *mean)?; lm.len()],
        LmExpectation::PerItem(e) => {
            if e.len() != lm.len() {
                return Err(StatsError::LengthMismatch { left: e.len(), right: lm.len() });
            }
            e.iter().map(|&ei| bernoulli_q(mu, rho, ei)).collect::<Result<_, _>>()?
        }
    };
    Ok(lm
        .iter()
        .zip(qs)
        .map(|(&h, q)| {
            if rng.random_bool(rho) {
                h
            } else {
                u8::from(rng.random_bool(q))
            }
        })
        .collect())
}

/// Mean per-item disagreement over all unordered pairs of samples.
pub fn estimate_gamma(samples: &[Vec<u8>]) -> Result<f64, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::InvalidParameter("need at least 2 samples".into()));
    }
    let n = samples[0].len();
    if n == 0 {
        return Err(StatsError::Empty);
    }
    for s in samples {
        if s.len() != n {
            return Err(StatsError::LengthMismatch { left: n, right: s.len() });
        }
    }
    // Per item, disagreeing pairs = ones * zeros.
    let k = samples.len();
    let mut disagreeing = 0u64;
    for i in 0..n {
        let ones = samples.iter().filter(|s| s[i] == 1).count() as u64;
        disagreeing += ones * (k as u64 - ones);
    }
    let pairs = (k * (k - 1) / 2) as f64;
    Ok(disagreeing as f64 / (pairs * n as f64))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(StatsError::InvalidParameter("need at least 2 points".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateVariance("constant ranks"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub rho_grid: Vec<f64>,
    pub mu: f64,
    pub trials: usize,
    pub seed: u64,
    pub alpha: f64,
    pub mode: TestMode,
    pub ages: Vec<u32>,
    pub expectation: LmExpectation,
}

impl SimulationConfig {
    pub fn new(ages: Vec<u32>, mu: f64, seed: u64) -> Self {
        SimulationConfig {
            rho_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            mu,
            trials: 25,
            seed,
            alpha: 0.05,
            mode: TestMode::AtMost,
            ages,
            expectation: LmExpectation::Empirical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueSummary {
    pub mean: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub rejections: usize,
}

impl PValueSummary {
    pub fn from_values(values: &[f64], alpha: f64) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        PValueSummary {
            mean: sorted.iter().sum::<f64>() / n as f64,
            min: sorted[0],
            median,
            max: sorted[n - 1],
            rejections: sorted.iter().filter(|&&p| p <= alpha).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationCell {
    pub rho: f64,
    pub age: u32,
    pub n: u64,
    pub gamma: f64,
    pub td: PValueSummary,
    pub means: PValueSummary,
    /// Per-trial p-values, in trial order.
    pub td_p_values: Vec<f64>,
    pub means_p_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub lm_mean: f64,
    pub skipped_ages: Vec<u32>,
    pub cells: Vec<SimulationCell>,
}

impl SimulationReport {
    /// Mean TD p-value at `age` for each rho, in grid order.
    pub fn td_trend(&self, age: u32) -> Vec<(f64, f64)> {
        self.cells.iter().filter(|c| c.age == age).map(|c| (c.rho, c.td.mean)).collect()
    }

    pub fn cell(&self, rho: f64, age: u32) -> Option<&SimulationCell> {
        self.cells.iter().find(|c| c.rho == rho && c.age == age)
    }
}

/// Run both tests over `trials` simulated human samples for every
/// `(rho, age)` pair. Trial `t` draws from the same random stream for every
/// rho, and `gamma` per cell is estimated from that cell's trial samples.
pub fn simulation_experiment(
    lm: &[ScoredItem],
    config: &SimulationConfig,
) -> Result<SimulationReport, StatsError> {
    if lm.is_empty() {
        return Err(StatsError::Empty);
    }
    if config.trials < 2 {
        return Err(StatsError::InvalidParameter("need at least 2 trials".into()));
    }
    if config.rho_grid.is_empty() || config.ages.is_empty() {
        return Err(StatsError::InvalidParameter("empty rho grid or age grid".into()));
    }
    check_alpha(config.alpha)?;
    let outcomes: Vec<u8> = lm.iter().map(|it| it.h_lm).collect();
    check_binary(&outcomes)?;
    let lm_mean = outcomes.iter().map(|&h| f64::from(h)).sum::<f64>() / outcomes.len() as f64;

    let mut ages = config.ages.clone();
    ages.sort_unstable();
    ages.dedup();
    let mut buckets = Vec::new();
    let mut skipped = Vec::new();
    for &age in &ages {
        let idx: Vec<usize> = (0..lm.len())
            .filter(|&i| in_bucket(lm[i].age_bucket(), age, config.mode))
            .collect();
        if idx.is_empty() {
            skipped.push(age);
        } else {
            buckets.push((age, idx));
        }
    }
    if buckets.is_empty() {
        return Err(StatsError::NoData);
    }

    let mut cells = Vec::new();
    for &rho in &config.rho_grid {
        let samples: Vec<Vec<u8>> = (0..config.trials)
            .map(|t| {
                let mut rng = sub_rng(config.seed, t as u64);
                simulate_human_with(&outcomes, rho, config.mu, &config.expectation, &mut rng)
            })
            .collect::<Result<_, _>>()?;
        for (age, idx) in &buckets {
            let n = idx.len() as u64;
            let restricted: Vec<Vec<u8>> =
                samples.iter().map(|s| idx.iter().map(|&i| s[i]).collect()).collect();
            let gamma = estimate_gamma(&restricted)?;
            let correct = idx.iter().filter(|&&i| outcomes[i] == 1).count() as u64;
            let mut td_ps = Vec::with_capacity(config.trials);
            let mut means_ps = Vec::with_capacity(config.trials);
            for human in &restricted {
                let d = human.iter().zip(idx).filter(|(h, &i)| **h != outcomes[i]).count() as u64;
                // gamma = 1 only if every pair of samples disagrees everywhere.
                let g = gamma.min(1.0 - f64::EPSILON);
                td_ps.push(td_test(d, n, g, config.alpha)?.p_value);
                means_ps.push(means_test(correct, n, config.mu, config.alpha)?.p_value);
            }
            cells.push(SimulationCell {
                rho,
                age: *age,
                n,
                gamma,
                td: PValueSummary::from_values(&td_ps, config.alpha),
                means: PValueSummary::from_values(&means_ps, config.alpha),
                td_p_values: td_ps,
                means_p_values: means_ps,
            });
        }
    }
    Ok(SimulationReport { config: config.clone(), lm_mean, skipped_ages: skipped, cells })
}
