//! Age-alignment profiles: one binomial test per age bucket.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tests::{means_test, td_test};
use super::StatsError;
use crate::model::{AgeTestResult, TestKind, TestMode};

/// A scored question with its (pair) AoA. `h_human` is required by the TD test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub aoa: f64,
    pub h_lm: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_human: Option<u8>,
}

impl ScoredItem {
    pub fn age_bucket(&self) -> u32 {
        self.aoa.trunc() as u32
    }
}

/// A parameter that may vary by age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAge {
    Constant(f64),
    Table(BTreeMap<u32, f64>),
}

impl PerAge {
    pub fn get(&self, age: u32) -> Option<f64> {
        match self {
            PerAge::Constant(v) => Some(*v),
            PerAge::Table(t) => t.get(&age).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeProfileConfig {
    pub mode: TestMode,
    pub test: TestKind,
    pub alpha: f64,
    pub ages: Vec<u32>,
    /// Expected human correctness, used by the means test.
    pub mu: PerAge,
    /// Divergence tolerance, used by the TD test.
    pub gamma: PerAge,
}

impl AgeProfileConfig {
    pub fn means(mode: TestMode, mu: f64, ages: Vec<u32>) -> Self {
        AgeProfileConfig {
            mode,
            test: TestKind::Means,
            alpha: 0.05,
            ages,
            mu: PerAge::Constant(mu),
            gamma: PerAge::Constant(0.0),
        }
    }

    pub fn td(mode: TestMode, gamma: f64, ages: Vec<u32>) -> Self {
        AgeProfileConfig {
            mode,
            test: TestKind::Td,
            alpha: 0.05,
            ages,
            mu: PerAge::Constant(0.5),
            gamma: PerAge::Constant(gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeProfile {
    pub rows: Vec<AgeTestResult>,
    /// Grid ages with no questions in their bucket.
    pub skipped_ages: Vec<u32>,
    /// Ages whose null of alignment was not rejected.
    pub aligned_ages: Vec<u32>,
    pub min_aligned_age: Option<u32>,
    /// Oldest age of the leading run of non-rejected ages: the age at which
    /// alignment stops when scanning the grid upward. `None` when the
    /// youngest tested age already rejects.
    pub age_estimate: Option<u32>,
}

/// Whether an item belongs to the bucket for `age` under `mode`.
pub fn in_bucket(item_age: u32, age: u32, mode: TestMode) -> bool {
    match mode {
        TestMode::Exact => item_age == age,
        TestMode::AtMost => item_age <= age,
    }
}

pub fn age_profile(items: &[ScoredItem], config: &AgeProfileConfig) -> Result<AgeProfile, StatsError> {
    if config.ages.is_empty() {
        return Err(StatsError::InvalidParameter("age grid is empty".into()));
    }
    let mut ages = config.ages.clone();
    ages.sort_unstable();
    ages.dedup();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &age in &ages {
        let bucket: Vec<&ScoredItem> = items
            .iter()
            .filter(|it| in_bucket(it.age_bucket(), age, config.mode))
            .collect();
        if bucket.is_empty() {
            skipped.push(age);
            continue;
        }
        let n = bucket.len() as u64;
        let test = match config.test {
            TestKind::Means => {
                let mu = config.mu.get(age).ok_or_else(|| {
                    StatsError::InvalidParameter(format!("no mu for age {age}"))
                })?;
                let correct = bucket.iter().filter(|it| it.h_lm == 1).count() as u64;
                means_test(correct, n, mu, config.alpha)?
            }
            TestKind::Td => {
                let gamma = config.gamma.get(age).ok_or_else(|| {
                    StatsError::InvalidParameter(format!("no gamma for age {age}"))
                })?;
                let mut disagreements = 0u64;
                for it in &bucket {
                    let human = it.h_human.ok_or_else(|| {
                        StatsError::InvalidParameter("TD test needs human outcomes".into())
                    })?;
                    disagreements += u64::from(human != it.h_lm);
                }
                td_test(disagreements, n, gamma, config.alpha)?
            }
        };
        rows.push(test.at_age(f64::from(age), config.mode, config.test));
    }
    if rows.is_empty() {
        return Err(StatsError::NoData);
    }

    let aligned: Vec<u32> = rows.iter().filter(|r| !r.reject).map(|r| r.age_years as u32).collect();
    let age_estimate = rows
        .iter()
        .take_while(|r| !r.reject)
        .last()
        .map(|r| r.age_years as u32);
    Ok(AgeProfile {
        min_aligned_age: aligned.first().copied(),
        aligned_ages: aligned,
        skipped_ages: skipped,
        age_estimate,
        rows,
    })
}
