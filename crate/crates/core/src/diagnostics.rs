//! Posterior summaries and effective sample size.

use serde::{Deserialize, Serialize};

use crate::engine::{AcceptanceSummary, DrawStore};

/// Effective sample size from Geyer's initial monotone sequence estimator.
///
/// A constant trace carries no information about autocorrelation and gets
/// ESS 1.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let gamma0 = autocov(0);
    if !(gamma0 > 0.0) {
        return 1.0;
    }

    // Sum of paired autocorrelations, truncated at the first non-positive
    // pair and forced to be non-increasing.
    let mut sum = 0.0;
    let mut previous = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (autocov(2 * m) + autocov(2 * m + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous);
        sum += pair;
        previous = pair;
        m += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64 * (n as f64).log10())
}

/// Lower empirical quantile: the smallest draw whose empirical CDF reaches
/// `q`. `sorted` must be ascending.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let idx = ((q * sorted.len() as f64 - 1e-9).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub ess: f64,
}

impl ParamSummary {
    pub fn from_trace(name: &str, trace: &[f64]) -> Self {
        let n = trace.len() as f64;
        let mean = trace.iter().sum::<f64>() / n;
        let var = trace.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let mut sorted = trace.to_vec();
        sorted.sort_by(f64::total_cmp);
        ParamSummary {
            name: name.to_string(),
            mean,
            sd: var.sqrt(),
            q05: sorted_quantile(&sorted, 0.05),
            q50: sorted_quantile(&sorted, 0.5),
            q95: sorted_quantile(&sorted, 0.95),
            ess: effective_sample_size(trace),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub n_draws: usize,
    pub parameters: Vec<ParamSummary>,
    pub acceptance: AcceptanceSummary,
}

pub fn summarize(store: &DrawStore) -> ChainSummary {
    ChainSummary {
        n_draws: store.n_draws,
        parameters: store
            .traces
            .iter()
            .filter(|(_, t)| !t.is_empty())
            .map(|(name, t)| ParamSummary::from_trace(name, t))
            .collect(),
        acceptance: store.acceptance.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{dist, ChainRng};
    use rand::SeedableRng;

    #[test]
    fn ess_of_independent_draws_is_close_to_n() {
        let mut rng = ChainRng::seed_from_u64(1);
        let x: Vec<f64> = (0..20_000).map(|_| dist::std_normal(&mut rng)).collect();
        let ess = effective_sample_size(&x);
        assert!((ess / 20_000.0 - 1.0).abs() < 0.1, "{ess}");
    }

    #[test]
    fn ess_of_ar1_matches_theory() {
        // AR(1) with coefficient a: integrated autocorrelation (1 + a) / (1 - a).
        let mut rng = ChainRng::seed_from_u64(2);
        let a: f64 = 0.9;
        let n = 200_000;
        let mut x = Vec::with_capacity(n);
        let mut v = 0.0;
        for _ in 0..n {
            v = a * v + (1.0 - a * a).sqrt() * dist::std_normal(&mut rng);
            x.push(v);
        }
        let expected = n as f64 * (1.0 - a) / (1.0 + a);
        let ess = effective_sample_size(&x);
        assert!((ess / expected - 1.0).abs() < 0.15, "{ess} vs {expected}");
    }

    #[test]
    fn ess_of_constant_trace_is_small() {
        assert!(effective_sample_size(&[3.0; 1000]) <= 2.0);
    }

    #[test]
    fn quantile_convention() {
        let sorted: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(sorted_quantile(&sorted, 0.1), 1.0);
        assert_eq!(sorted_quantile(&sorted, 0.11), 2.0);
        assert_eq!(sorted_quantile(&sorted, 0.9), 9.0);
        assert_eq!(sorted_quantile(&sorted, 0.99), 10.0);
        assert_eq!(sorted_quantile(&sorted, 0.0), 1.0);
    }
}
