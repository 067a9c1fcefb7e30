//! Test divergence and the two binomial tests for LM age.

use serde::{Deserialize, Serialize};

use super::binomial::{lower_tail, upper_tail};
use super::{check_alpha, check_binary, StatsError};
use crate::model::{AgeTestResult, TestKind, TestMode};

/// Per-question human and LM outcomes with the question AoA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedOutcomes {
    pub h_human: Vec<u8>,
    pub h_lm: Vec<u8>,
    pub aoa: Vec<f64>,
}

impl PairedOutcomes {
    pub fn new(h_human: Vec<u8>, h_lm: Vec<u8>, aoa: Vec<f64>) -> Result<Self, StatsError> {
        if h_human.len() != h_lm.len() {
            return Err(StatsError::LengthMismatch { left: h_human.len(), right: h_lm.len() });
        }
        if aoa.len() != h_lm.len() {
            return Err(StatsError::LengthMismatch { left: aoa.len(), right: h_lm.len() });
        }
        check_binary(&h_human)?;
        check_binary(&h_lm)?;
        if let Some(a) = aoa.iter().find(|a| a.is_nan() || **a <= 0.0) {
            return Err(StatsError::InvalidParameter(format!("aoa {a} must be positive")));
        }
        Ok(PairedOutcomes { h_human, h_lm, aoa })
    }

    pub fn test_divergence(&self) -> Result<f64, StatsError> {
        test_divergence(&self.h_human, &self.h_lm)
    }
}

/// Mean absolute difference between human and LM outcomes.
pub fn test_divergence(human: &[u8], lm: &[u8]) -> Result<f64, StatsError> {
    if human.len() != lm.len() {
        return Err(StatsError::LengthMismatch { left: human.len(), right: lm.len() });
    }
    if human.is_empty() {
        return Err(StatsError::Empty);
    }
    check_binary(human)?;
    check_binary(lm)?;
    let disagreements = human.iter().zip(lm).filter(|(a, b)| a != b).count();
    Ok(disagreements as f64 / human.len() as f64)
}

/// Result of a one-sided exact binomial test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialTest {
    pub statistic: f64,
    pub n: u64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
}

impl BinomialTest {
    fn new(count: u64, n: u64, p_value: f64, alpha: f64) -> Self {
        BinomialTest {
            statistic: count as f64 / n as f64,
            n,
            p_value,
            alpha,
            reject: p_value <= alpha,
        }
    }

    pub fn at_age(self, age_years: f64, mode: TestMode, test_kind: TestKind) -> AgeTestResult {
        AgeTestResult {
            age_years,
            mode,
            test_kind,
            statistic: self.statistic,
            n: self.n,
            p_value: self.p_value,
            alpha: self.alpha,
            reject: self.reject,
        }
    }
}

/// TD test. Null: divergence at most `gamma`, tested at the boundary, so
/// `p = Pr(Binomial(n, gamma) >= disagreements)`.
pub fn td_test(disagreements: u64, n: u64, gamma: f64, alpha: f64) -> Result<BinomialTest, StatsError> {
    check_alpha(alpha)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(StatsError::InvalidParameter(format!("gamma {gamma} not in [0,1)")));
    }
    if n == 0 {
        return Err(StatsError::Empty);
    }
    if disagreements > n {
        return Err(StatsError::InvalidParameter(format!(
            "{disagreements} disagreements exceed n = {n}"
        )));
    }
    let p = if gamma == 0.0 {
        if disagreements == 0 { 1.0 } else { 0.0 }
    } else {
        upper_tail(n, gamma, disagreements)
    };
    Ok(BinomialTest::new(disagreements, n, p, alpha))
}

/// Means test. Alternative: the LM's expected correct count is below
/// `n * mu`, so `p = Pr(Binomial(n, mu) <= correct)`.
pub fn means_test(correct: u64, n: u64, mu: f64, alpha: f64) -> Result<BinomialTest, StatsError> {
    check_alpha(alpha)?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(StatsError::InvalidParameter(format!("mu {mu} not in (0,1)")));
    }
    if n == 0 {
        return Err(StatsError::Empty);
    }
    if correct > n {
        return Err(StatsError::InvalidParameter(format!("{correct} correct exceeds n = {n}")));
    }
    Ok(BinomialTest::new(correct, n, lower_tail(n, mu, correct), alpha))
}

#[cfg(test)]
mod unit {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn divergence_examples() {
        assert_eq!(test_divergence(&[1, 0, 1], &[1, 0, 1]).unwrap(), 0.0);
        assert_eq!(test_divergence(&[1, 0, 1], &[0, 1, 0]).unwrap(), 1.0);
        assert_eq!(test_divergence(&[1, 1, 0, 1], &[1, 0, 0, 0]).unwrap(), 0.5);
        assert_eq!(test_divergence(&[], &[]), Err(StatsError::Empty));
        assert!(matches!(test_divergence(&[1], &[1, 0]), Err(StatsError::LengthMismatch { .. })));
    }

    #[test]
    fn td_examples() {
        // 1 - sum_{k<3} C(10,k) 0.1^k 0.9^(10-k)
        let oracle = 1.0
            - (0.9f64.powi(10) + 10.0 * 0.1 * 0.9f64.powi(9) + 45.0 * 0.01 * 0.9f64.powi(8));
        let t = td_test(3, 10, 0.1, 0.05).unwrap();
        assert!((t.p_value - oracle).abs() < 1e-12);
        assert!((t.p_value - 0.0702).abs() < 1e-4);
        assert!(!t.reject);

        let t = td_test(0, 25, 0.3, 0.05).unwrap();
        assert_eq!(t.p_value, 1.0);
        assert!(!t.reject);

        let t = td_test(10, 10, 0.0, 0.05).unwrap();
        assert_eq!(t.p_value, 0.0);
        assert!(t.reject);

        assert!(td_test(1, 10, 1.0, 0.05).is_err());
        assert!(td_test(11, 10, 0.2, 0.05).is_err());
    }

    #[test]
    fn means_examples() {
        let t = means_test(5, 10, 0.5, 0.05).unwrap();
        assert!((t.p_value - 638.0 / 1024.0).abs() < 1e-12);
        assert!(!t.reject);

        let t = means_test(0, 100, 0.47, 0.05).unwrap();
        assert!(t.p_value < 1e-20 && t.p_value > 0.0);
        assert!(t.reject);

        assert_eq!(means_test(40, 40, 0.9, 0.05).unwrap().p_value, 1.0);
        assert!(means_test(1, 10, 0.0, 0.05).is_err());
        assert!(means_test(1, 10, 1.0, 0.05).is_err());
    }

    proptest! {
        #[test]
        fn means_p_decreases_in_mu(n in 2u64..80, frac in 0.01f64..0.99, mu in 0.02f64..0.97) {
            let r = ((n as f64 * frac) as u64).clamp(1, n - 1);
            let lo = means_test(r, n, mu, 0.05).unwrap().p_value;
            let hi = means_test(r, n, mu + 0.01, 0.05).unwrap().p_value;
            prop_assert!(hi <= lo);
            // Strict away from the ends, where f64 saturates.
            if lo < 1.0 - 1e-9 && hi > 1e-250 {
                prop_assert!(hi < lo, "n={} r={} p({})={} p({})={}", n, r, mu, lo, mu + 0.01, hi);
            }
        }

        #[test]
        fn td_p_non_increasing_in_disagreements(n in 1u64..80, gamma in 0.0f64..0.99) {
            let mut prev = 1.0;
            for d in 0..=n {
                let p = td_test(d, n, gamma, 0.05).unwrap().p_value;
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!(p <= prev);
                prev = p;
            }
        }

        #[test]
        fn divergence_is_symmetric_xor(v in proptest::collection::vec((0u8..2, 0u8..2), 1..50)) {
            let (a, b): (Vec<u8>, Vec<u8>) = v.into_iter().unzip();
            let xor = a.iter().zip(&b).map(|(x, y)| f64::from(x ^ y)).sum::<f64>() / a.len() as f64;
            prop_assert_eq!(test_divergence(&a, &b).unwrap(), test_divergence(&b, &a).unwrap());
            prop_assert!((test_divergence(&a, &b).unwrap() - xor).abs() < 1e-15);
        }
    }
}
