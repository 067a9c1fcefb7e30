//! Pearson chi-squared test of independence on an r x c table.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use super::StatsError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub row_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub col_labels: Vec<String>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self, StatsError> {
        let cols = counts.first().map(Vec::len).unwrap_or(0);
        if counts.len() < 2 || cols < 2 {
            return Err(StatsError::InvalidParameter("table must be at least 2x2".into()));
        }
        if let Some(row) = counts.iter().find(|r| r.len() != cols) {
            return Err(StatsError::DimensionMismatch { expected: cols, found: row.len() });
        }
        Ok(ContingencyTable { counts, row_labels: Vec::new(), col_labels: Vec::new() })
    }

    /// Cross-tabulate paired categorical observations. Labels are sorted.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self, StatsError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let mut rows: Vec<&str> = pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<&str> = pairs.iter().map(|p| p.1).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (r, c) in &pairs {
            let i = rows.binary_search(r).expect("row label present");
            let j = cols.binary_search(c).expect("col label present");
            counts[i][j] += 1;
        }
        let mut table = ContingencyTable::new(counts)?;
        table.row_labels = rows.into_iter().map(str::to_owned).collect();
        table.col_labels = cols.into_iter().map(str::to_owned).collect();
        Ok(table)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Row-wise proportions; rows with no observations stay at zero.
    pub fn row_proportions(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
    /// `min(1, p * n_tests)`.
    pub adjusted_p: f64,
    pub n_tests: u32,
    pub expected: Vec<Vec<f64>>,
}

/// Upper tail of the chi-squared distribution with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: u64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

pub fn chi2_independence(table: &ContingencyTable, n_tests: u32) -> Result<ChiSquareResult, StatsError> {
    if n_tests == 0 {
        return Err(StatsError::InvalidParameter("n_tests must be positive".into()));
    }
    let counts = &table.counts;
    let r = counts.len();
    let c = counts.first().map(Vec::len).unwrap_or(0);
    if r < 2 || c < 2 {
        return Err(StatsError::InvalidParameter("table must be at least 2x2".into()));
    }
    let total = table.total() as f64;
    let row_sums: Vec<f64> = counts.iter().map(|row| row.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> =
        (0..c).map(|j| counts.iter().map(|row| row[j]).sum::<u64>() as f64).collect();

    let mut expected = vec![vec![0.0; c]; r];
    let mut statistic = 0.0;
    for i in 0..r {
        for j in 0..c {
            let e = row_sums[i] * col_sums[j] / total;
            if e.is_nan() || e <= 0.0 {
                return Err(StatsError::ZeroExpected { row: i, col: j });
            }
            let diff = counts[i][j] as f64 - e;
            statistic += diff * diff / e;
            expected[i][j] = e;
        }
    }
    let df = ((r - 1) * (c - 1)) as u64;
    let p_value = chi2_sf(statistic, df);
    Ok(ChiSquareResult {
        statistic,
        df,
        p_value,
        adjusted_p: (p_value * f64::from(n_tests)).min(1.0),
        n_tests,
        expected,
    })
}
