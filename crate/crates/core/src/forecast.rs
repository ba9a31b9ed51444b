//! One-step-ahead predictive draws and their evaluation: log predictive
//! score, tail-quantile coverage and log-scale point metrics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::count_model::{log_sum_exp, Week};
use crate::diagnostics::sorted_quantile;
use crate::dist;
use crate::engine::DrawStore;

/// Tail quantiles reported in coverage tables.
pub const COVERAGE_QUANTILES: [f64; 6] = [0.01, 0.05, 0.10, 0.90, 0.95, 0.99];

/// Predictive draws of `y_{T+1}` from one fit, optionally with per-draw log
/// densities at the realized hold-out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSet {
    pub draws: Vec<u64>,
    pub log_densities: Vec<f64>,
    /// Whether the draws condition on an open gate `s_{T+1} = 1`.
    pub conditional: bool,
    /// Posterior predictive mean, used as the point forecast.
    pub mean: f64,
}

impl PredictiveSet {
    pub fn from_store(store: &DrawStore, conditional: bool) -> Self {
        let p = &store.predictive;
        if conditional {
            PredictiveSet {
                draws: p.conditional.clone(),
                log_densities: p.conditional_log_density.clone(),
                conditional,
                mean: p.conditional_mean,
            }
        } else {
            PredictiveSet {
                draws: p.unconditional.clone(),
                log_densities: p.unconditional_log_density.clone(),
                conditional,
                mean: p.unconditional_mean,
            }
        }
    }

    /// Log predictive score at the hold-out; `None` without densities.
    pub fn log_score(&self) -> Option<f64> {
        (!self.log_densities.is_empty()).then(|| log_predictive_score(&self.log_densities))
    }

    /// Draws in ascending order, as `f64`.
    pub fn sorted_draws(&self) -> Vec<f64> {
        let mut sorted: Vec<f64> = self.draws.iter().map(|&y| y as f64).collect();
        sorted.sort_by(f64::total_cmp);
        sorted
    }

    pub fn quantile(&self, q: f64) -> u64 {
        sorted_quantile(&self.sorted_draws(), q) as u64
    }
}

/// Summary of a one-step-ahead predictive distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSummary {
    pub week: Week,
    pub conditional: bool,
    pub mean: f64,
    pub n_draws: usize,
    /// `(q, quantile)` pairs.
    pub quantiles: Vec<(f64, u64)>,
}

impl ForecastSummary {
    pub fn new(set: &PredictiveSet, week: Week, quantiles: &[f64]) -> Self {
        let sorted = set.sorted_draws();
        ForecastSummary {
            week,
            conditional: set.conditional,
            mean: set.mean,
            n_draws: set.draws.len(),
            quantiles: quantiles.iter().map(|&q| (q, sorted_quantile(&sorted, q) as u64)).collect(),
        }
    }
}

/// One draw of `y_{T+1}` given `z_{T+1}` and `pi`.
pub fn predictive_draw<R: Rng + ?Sized>(z_next: f64, pi: f64, conditional: bool, rng: &mut R) -> u64 {
    if !conditional && !dist::bernoulli(rng, pi) {
        return 0;
    }
    dist::poisson(rng, z_next.exp())
}

/// `log((1/M) sum_m exp(l_m))` from per-draw log densities `l_m`.
pub fn log_predictive_score(log_densities: &[f64]) -> f64 {
    assert!(!log_densities.is_empty(), "log predictive score needs at least one draw");
    let score = log_sum_exp(log_densities) - (log_densities.len() as f64).ln();
    if score == f64::NEG_INFINITY {
        log::warn!("every predictive draw assigns zero density to the hold-out");
    }
    score
}

/// Fraction of observations at or below each predictive quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub quantiles: Vec<f64>,
    pub coverage: Vec<f64>,
    pub n: usize,
}

impl CoverageTable {
    pub fn at(&self, q: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .position(|&v| (v - q).abs() < 1e-12)
            .map(|i| self.coverage[i])
    }
}

/// Per-observation coverage indicators for each `q`.
pub fn coverage_indicators(set: &PredictiveSet, observed: u64, quantiles: &[f64]) -> Vec<bool> {
    let sorted = set.sorted_draws();
    quantiles
        .iter()
        .map(|&q| observed as f64 <= sorted_quantile(&sorted, q))
        .collect()
}

pub fn coverage_report(sets: &[PredictiveSet], observed: &[u64], quantiles: &[f64]) -> CoverageTable {
    assert_eq!(sets.len(), observed.len(), "predictive sets and observations must align");
    let mut hits = vec![0usize; quantiles.len()];
    for (set, &y) in sets.iter().zip(observed) {
        for (h, covered) in hits.iter_mut().zip(coverage_indicators(set, y, quantiles)) {
            *h += covered as usize;
        }
    }
    let n = sets.len();
    CoverageTable {
        quantiles: quantiles.to_vec(),
        coverage: hits
            .iter()
            .map(|&h| if n == 0 { f64::NAN } else { h as f64 / n as f64 })
            .collect(),
        n,
    }
}

/// Transform applied to forecasts and observations before point metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricScale {
    /// `log(v)`, for positive observations only.
    Log,
    /// `log(1 + v)`, defined at zero.
    Log1p,
}

impl MetricScale {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            MetricScale::Log => v.ln(),
            MetricScale::Log1p => v.ln_1p(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub rmse: f64,
    /// Pearson correlation; `None` with fewer than two points or zero spread.
    pub correlation: Option<f64>,
    pub n: usize,
}

pub fn point_metrics(forecasts: &[f64], observed: &[f64], scale: MetricScale) -> PointMetrics {
    assert_eq!(forecasts.len(), observed.len(), "forecasts and observations must align");
    let f: Vec<f64> = forecasts.iter().map(|&v| scale.apply(v)).collect();
    let o: Vec<f64> = observed.iter().map(|&v| scale.apply(v)).collect();
    let n = f.len();
    if n == 0 {
        return PointMetrics {
            rmse: f64::NAN,
            correlation: None,
            n,
        };
    }
    let rmse = (f.iter().zip(&o).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt();
    PointMetrics {
        rmse,
        correlation: pearson(&f, &o),
        n,
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    let denom = (sxx * syy).sqrt();
    (denom > 0.0).then(|| (sxy / denom).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ChainRng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn set(draws: Vec<u64>) -> PredictiveSet {
        PredictiveSet {
            draws,
            log_densities: Vec::new(),
            conditional: true,
            mean: 0.0,
        }
    }

    #[test]
    fn closed_gate_always_zero() {
        let mut rng = ChainRng::seed_from_u64(1);
        assert!((0..1000).all(|_| predictive_draw(5.0, 0.0, false, &mut rng) == 0));
    }

    #[test]
    fn conditional_mean() {
        let mut rng = ChainRng::seed_from_u64(2);
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| predictive_draw(4f64.ln(), 0.3, true, &mut rng)).sum();
        assert!((total as f64 / n as f64 - 4.0).abs() < 0.02);
    }

    #[test]
    fn unconditional_zero_probability() {
        let mut rng = ChainRng::seed_from_u64(3);
        let n = 1_000_000;
        let zeros = (0..n)
            .filter(|_| predictive_draw(4f64.ln(), 0.5, false, &mut rng) == 0)
            .count();
        let expected = 0.5 + 0.5 * (-4f64).exp();
        assert_relative_eq!(expected, 0.50916, epsilon = 1e-5);
        assert!((zeros as f64 / n as f64 - expected).abs() < 0.002);
    }

    #[test]
    fn lps_examples() {
        assert_relative_eq!(log_predictive_score(&[0.3f64.ln(); 7]), 0.3f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(
            log_predictive_score(&[0.2f64.ln(), 0.4f64.ln()]),
            -1.203973,
            epsilon = 1e-6
        );
        assert_relative_eq!(
            log_predictive_score(&[-700.0, -1.0]),
            -1.0 - 2f64.ln(),
            epsilon = 1e-12
        );
        assert_eq!(log_predictive_score(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn lps_converges_to_closed_form() {
        let mut rng = ChainRng::seed_from_u64(4);
        let (z, pi, y) = (1.5f64, 0.8, 3u64);
        let m = 100_000;
        // Fixed z and pi: per-draw densities are constant, so draw through a
        // noisy z to exercise the estimator.
        let logs: Vec<f64> = (0..m)
            .map(|_| {
                let zz = z + 0.01 * dist::std_normal(&mut rng);
                crate::zip_log_pmf(y, zz, pi).unwrap()
            })
            .collect();
        let exact = crate::zip_log_pmf(y, z, pi).unwrap();
        assert!((log_predictive_score(&logs) - exact).abs() < 0.01);
    }

    #[test]
    fn coverage_examples() {
        let sets = vec![set(vec![5, 6, 7]), set(vec![3, 9])];
        let table = coverage_report(&sets, &[0, 1], &COVERAGE_QUANTILES);
        assert!(table.coverage.iter().all(|&c| c == 1.0));

        let table = coverage_report(&[set(vec![4; 10])], &[4], &COVERAGE_QUANTILES);
        assert!(table.coverage.iter().all(|&c| c == 1.0));

        let hundred = set((1..=100).collect());
        assert_eq!(hundred.quantile(0.9), 90);
        assert_eq!(coverage_indicators(&hundred, 90, &[0.9]), vec![true]);
        assert_eq!(coverage_indicators(&hundred, 91, &[0.9]), vec![false]);
        let table = coverage_report(&[hundred.clone(), hundred], &[90, 91], &[0.9]);
        assert_eq!(table.at(0.9), Some(0.5));
    }

    #[test]
    fn point_metric_examples() {
        let y = [3.0, 10.0, 7.0, 50.0];
        let m = point_metrics(&y, &y, MetricScale::Log);
        assert_eq!(m.rmse, 0.0);
        assert_relative_eq!(m.correlation.unwrap(), 1.0, epsilon = 1e-12);

        let c = 0.7f64;
        let shifted: Vec<f64> = y.iter().map(|v| v * c.exp()).collect();
        let m = point_metrics(&shifted, &y, MetricScale::Log);
        assert_relative_eq!(m.rmse, c, epsilon = 1e-12);
        assert_relative_eq!(m.correlation.unwrap(), 1.0, epsilon = 1e-12);

        let (f, o) = ([2.0f64, 9.0], [4.0f64, 5.0]);
        let expected = ((((2f64).ln() - 4f64.ln()).powi(2) + (9f64.ln() - 5f64.ln()).powi(2)) / 2.0).sqrt();
        assert_relative_eq!(point_metrics(&f, &o, MetricScale::Log).rmse, expected, epsilon = 1e-15);

        let one = point_metrics(&[2.0], &[3.0], MetricScale::Log1p);
        assert!(one.correlation.is_none());
        assert_relative_eq!(one.rmse, (4f64 / 3.0).ln(), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn coverage_is_monotone_in_q(
            draws in prop::collection::vec(prop::collection::vec(0u64..50, 1..40), 1..20),
            seed in any::<u64>(),
        ) {
            let mut rng = ChainRng::seed_from_u64(seed);
            let observed: Vec<u64> = draws.iter().map(|_| rng.random_range(0..60)).collect();
            let sets: Vec<PredictiveSet> = draws.into_iter().map(set).collect();
            let table = coverage_report(&sets, &observed, &COVERAGE_QUANTILES);
            for pair in table.coverage.windows(2) {
                prop_assert!(pair[0] <= pair[1]);
            }
            prop_assert!(table.coverage.iter().all(|c| (0.0..=1.0).contains(c)));
        }

        #[test]
        fn unconditional_zero_mass_dominates_closed_gate(pi in 0.01f64..0.99, z in -2.0f64..3.0) {
            // P(y = 0) = (1 - pi) + pi exp(-lambda) >= 1 - pi.
            let p0 = crate::zip_log_pmf(0, z, pi).unwrap().exp();
            prop_assert!(p0 >= 1.0 - pi - 1e-15);
        }
    }
}
