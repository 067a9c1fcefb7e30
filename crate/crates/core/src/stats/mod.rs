//! Statistical machinery for age alignment and error analysis.

pub mod binomial;
pub mod chi2;
pub mod energy;
pub mod human;
pub mod kmeans;
pub mod lpm;
pub mod profile;
pub mod regression;
pub mod simulate;
pub mod tests;

pub use chi2::{chi2_independence, ChiSquareResult, ContingencyTable};
pub use energy::{energy_distance, energy_distance_with, EnergyEstimator};
pub use human::{
    estimate_human_mean, estimate_human_mean_with, guessing_correction, hoeffding_bound,
    HumanMeanEstimate, Interval, Sided,
};
pub use kmeans::{coarsen, coarsening_k, kmeans, KMeansResult};
pub use lpm::{fit_lpm, fit_lpm_with, LpmFit, LpmOptions};
pub use profile::{age_profile, AgeProfile, AgeProfileConfig, PerAge, ScoredItem};
pub use regression::{energy_td_regression, LineFit};
pub use simulate::{
    estimate_gamma, simulate_human, simulate_human_with, simulation_experiment, spearman,
    LmExpectation, PValueSummary, SimulationCell, SimulationConfig, SimulationReport,
};
pub use tests::{means_test, td_test, test_divergence, BinomialTest, PairedOutcomes};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible simulation parameters: {0}")]
    Infeasible(String),
    #[error("expected count is zero in row {row}, column {col}; merge sparse categories")]
    ZeroExpected { row: usize, col: usize },
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },
    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no age bucket has data")]
    NoData,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::InvalidParameter(format!("alpha {alpha} not in (0,1)")))
    }
}

pub(crate) fn check_binary(values: &[u8]) -> Result<(), StatsError> {
    match values.iter().find(|&&v| v > 1) {
        Some(v) => Err(StatsError::InvalidParameter(format!("outcome {v} is not binary"))),
        None => Ok(()),
    }
}
