//! Exact binomial tail probabilities, summed in log space.

use statrs::function::factorial::ln_binomial;

/// `ln Pr(X = k)` for `X ~ Binomial(n, p)`.
pub fn ln_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

fn ln_sum(n: u64, p: f64, ks: impl Iterator<Item = u64>) -> f64 {
    let terms: Vec<f64> = ks.map(|k| ln_pmf(n, p, k)).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `Pr(X >= k)`.
pub fn upper_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    // Sum the smaller tail directly and complement the larger one.
    if (k as f64) <= n as f64 * p {
        return (1.0 - lower_tail(n, p, k - 1)).clamp(0.0, 1.0);
    }
    ln_sum(n, p, k..=n).exp().clamp(0.0, 1.0)
}

/// `Pr(X <= k)`.
pub fn lower_tail(n: u64, p: f64, k: u64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if (k as f64) > n as f64 * p {
        return (1.0 - ln_sum(n, p, k + 1..=n).exp()).clamp(0.0, 1.0);
    }
    ln_sum(n, p, 0..=k).exp().clamp(0.0, 1.0)
}
