//! Human mean correctness: Hoeffding intervals and the guessing correction.

use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub half_width: f64,
}

/// Hoeffding interval around an empirical mean of `n` bounded draws.
///
/// Half-width is `sqrt(ln(s / alpha) / (2n))` with `s = 1` one-sided and
/// `s = 2` two-sided; the ends are clamped to `[0, 1]`.
pub fn hoeffding_bound(p_hat: f64, n: u64, alpha: f64, sided: Sided) -> Interval {
    assert!(n > 0, "hoeffding_bound needs n > 0");
    let s = match sided {
        Sided::One => 1.0,
        Sided::Two => 2.0,
    };
    let half_width = ((s / alpha).ln() / (2.0 * n as f64)).sqrt();
    Interval {
        lower: (p_hat - half_width).clamp(0.0, 1.0),
        upper: (p_hat + half_width).clamp(0.0, 1.0),
        half_width,
    }
}

/// Expected accuracy on a test with `n_options` choices when a fraction `p`
/// knows the answer and the rest guess uniformly.
pub fn guessing_correction(p: f64, n_options: u32) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::InvalidParameter(format!("p {p} not in [0,1]")));
    }
    if n_options < 2 {
        return Err(StatsError::InvalidParameter("need at least 2 options".into()));
    }
    Ok(p + (1.0 - p) / f64::from(n_options))
}

/// Intermediate values of the human-mean chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanMeanEstimate {
    /// Disagreement rate used: the one-sided upper bound, or the raw rate.
    pub disagreement: f64,
    pub agreement: f64,
    /// Probability of knowing the words and agreeing with the gold pair.
    pub knowledge: f64,
    pub mu: f64,
}

/// Expected fraction of humans at an age level answering a question
/// correctly, from annotator disagreement and a knowledge prior.
///
/// Uses the one-sided Hoeffding upper bound on disagreement.
pub fn estimate_human_mean(
    disagreement_rate: f64,
    n_annotated: u64,
    alpha: f64,
    p_know: f64,
    n_options: u32,
) -> Result<f64, StatsError> {
    estimate_human_mean_with(disagreement_rate, n_annotated, alpha, p_know, n_options, true)
        .map(|e| e.mu)
}

/// As [`estimate_human_mean`]; `use_hoeffding = false` takes the observed
/// disagreement as is.
pub fn estimate_human_mean_with(
    disagreement_rate: f64,
    n_annotated: u64,
    alpha: f64,
    p_know: f64,
    n_options: u32,
    use_hoeffding: bool,
) -> Result<HumanMeanEstimate, StatsError> {
    if !(0.0..=1.0).contains(&disagreement_rate) {
        return Err(StatsError::InvalidParameter(format!(
            "disagreement {disagreement_rate} not in [0,1]"
        )));
    }
    if !(0.0..=1.0).contains(&p_know) {
        return Err(StatsError::InvalidParameter(format!("p_know {p_know} not in [0,1]")));
    }
    super::check_alpha(alpha)?;
    if n_annotated == 0 {
        return Err(StatsError::Empty);
    }
    let disagreement = if use_hoeffding {
        hoeffding_bound(disagreement_rate, n_annotated, alpha, Sided::One).upper
    } else {
        disagreement_rate
    };
    let agreement = 1.0 - disagreement;
    // Agreement and knowledge are treated as independent.
    let knowledge = p_know * agreement;
    Ok(HumanMeanEstimate {
        disagreement,
        agreement,
        knowledge,
        mu: guessing_correction(knowledge, n_options)?,
    })
}
