//! Rolling-origin evaluation: every window is fitted from scratch, scored on
//! its single hold-out point, and the per-window results are aggregated into
//! a conditional report (positive hold-outs, open gate) and a full-sample
//! report (all hold-outs, zero-inflated predictive).

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::count_model::{CountSeries, Week};
use crate::engine::{run_chain_with_holdout, McmcConfig};
use crate::diagnostics::sorted_quantile;
use crate::forecast::{point_metrics, MetricScale, PredictiveSet, COVERAGE_QUANTILES};
use crate::innovations::InnovationModel;
use crate::{Error, Result};

pub const MIN_TRAIN_LENGTH: usize = 10;
pub const DEFAULT_WINDOWS: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestPlan {
    pub dataset: String,
    pub n_windows: usize,
    /// Per-window sampler settings; `seed` acts as the master seed and
    /// `store_paths` is ignored.
    pub mcmc: McmcConfig,
    pub variants: Vec<InnovationModel>,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl BacktestPlan {
    pub fn new(dataset: impl Into<String>, n_windows: usize, mcmc: McmcConfig) -> Self {
        BacktestPlan {
            dataset: dataset.into(),
            n_windows,
            mcmc,
            variants: InnovationModel::ALL.to_vec(),
            threads: None,
        }
    }

    pub fn train_length(&self, series_len: usize) -> Option<usize> {
        series_len.checked_sub(self.n_windows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    pub train: Range<usize>,
    pub holdout: usize,
}

/// Windows `i = 0..n_windows`, each training on `[i, i + T - n_windows)`
/// and holding out the next observation.
pub fn rolling_windows(series_len: usize, n_windows: usize) -> Result<Vec<Window>> {
    if n_windows == 0 {
        return Err(Error::InvalidConfig("at least one window is required".into()));
    }
    let required = n_windows + MIN_TRAIN_LENGTH;
    if series_len < required {
        return Err(Error::SeriesTooShort {
            len: series_len,
            required,
        });
    }
    let train_length = series_len - n_windows;
    Ok((0..n_windows)
        .map(|i| Window {
            index: i,
            train: i..i + train_length,
            holdout: i + train_length,
        })
        .collect())
}

/// Seed of one (dataset, variant, window) cell, independent of scheduling.
pub fn cell_seed(master: u64, dataset: &str, model: InnovationModel, window: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((dataset.len() as u64).to_le_bytes());
    hasher.update(dataset.as_bytes());
    hasher.update(model.as_str().as_bytes());
    hasher.update((window as u64).to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Scores of one fitted window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub model: InnovationModel,
    pub window: usize,
    pub holdout_index: usize,
    pub week: Week,
    pub observed: u64,
    pub seed: u64,
    pub conditional_lps: f64,
    pub unconditional_lps: f64,
    pub conditional_mean: f64,
    pub unconditional_mean: f64,
    /// Predictive quantiles at [`COVERAGE_QUANTILES`].
    pub conditional_quantiles: Vec<u64>,
    pub unconditional_quantiles: Vec<u64>,
    pub latent_acceptance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub model: InnovationModel,
    pub window: usize,
    pub message: String,
}

/// One row of a report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub model: InnovationModel,
    /// Sum of per-window log predictive scores.
    pub lps: f64,
    pub rmse: f64,
    pub corr: Option<f64>,
    /// Coverage at [`COVERAGE_QUANTILES`].
    pub coverage: Vec<f64>,
    pub n: usize,
    /// False if any window of this model failed.
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFlavor {
    /// Positive hold-outs scored under the open-gate predictive.
    Conditional,
    /// All hold-outs scored under the zero-inflated predictive.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub dataset: String,
    pub n_windows: usize,
    pub train_length: usize,
    pub n_burn: usize,
    pub n_draws: usize,
    pub master_seed: u64,
    pub conditional: Vec<ReportRow>,
    pub full: Vec<ReportRow>,
    pub windows: Vec<WindowRecord>,
    pub failures: Vec<CellFailure>,
}

impl BacktestReport {
    pub fn rows(&self, flavor: ReportFlavor) -> &[ReportRow] {
        match flavor {
            ReportFlavor::Conditional => &self.conditional,
            ReportFlavor::Full => &self.full,
        }
    }

    pub fn row(&self, flavor: ReportFlavor, model: InnovationModel) -> Option<&ReportRow> {
        self.rows(flavor).iter().find(|r| r.model == model)
    }
}

fn score_window(
    series: &CountSeries,
    window: &Window,
    model: InnovationModel,
    plan: &BacktestPlan,
) -> Result<WindowRecord> {
    let seed = cell_seed(plan.mcmc.seed, &plan.dataset, model, window.index);
    let config = McmcConfig {
        seed,
        model,
        store_paths: false,
        ..plan.mcmc.clone()
    };
    let train = series.slice(window.train.clone())?;
    let observed = series.counts()[window.holdout];
    let store = run_chain_with_holdout(&train, &config, Some(observed))?;
    let cond = PredictiveSet::from_store(&store, true);
    let uncond = PredictiveSet::from_store(&store, false);
    let quantiles = |set: &PredictiveSet| {
        let sorted = set.sorted_draws();
        COVERAGE_QUANTILES
            .iter()
            .map(|&q| sorted_quantile(&sorted, q) as u64)
            .collect()
    };
    Ok(WindowRecord {
        model,
        window: window.index,
        holdout_index: window.holdout,
        week: series.labels()[window.holdout],
        observed,
        seed,
        conditional_lps: cond.log_score().expect("hold-out densities recorded"),
        unconditional_lps: uncond.log_score().expect("hold-out densities recorded"),
        conditional_mean: cond.mean,
        unconditional_mean: uncond.mean,
        conditional_quantiles: quantiles(&cond),
        unconditional_quantiles: quantiles(&uncond),
        latent_acceptance: store.acceptance.latent,
    })
}

/// Coverage, LPS and point metrics for one model and flavor.
pub fn aggregate(dataset: &str, model: InnovationModel, records: &[&WindowRecord], flavor: ReportFlavor, complete: bool) -> ReportRow {
    let selected: Vec<&WindowRecord> = match flavor {
        ReportFlavor::Conditional => records.iter().copied().filter(|r| r.observed > 0).collect(),
        ReportFlavor::Full => records.to_vec(),
    };
    let (lps, means, quantiles, scale): (f64, Vec<f64>, Vec<&[u64]>, MetricScale) = match flavor {
        ReportFlavor::Conditional => (
            selected.iter().map(|r| r.conditional_lps).sum(),
            selected.iter().map(|r| r.conditional_mean).collect(),
            selected.iter().map(|r| r.conditional_quantiles.as_slice()).collect(),
            MetricScale::Log,
        ),
        ReportFlavor::Full => (
            selected.iter().map(|r| r.unconditional_lps).sum(),
            selected.iter().map(|r| r.unconditional_mean).collect(),
            selected.iter().map(|r| r.unconditional_quantiles.as_slice()).collect(),
            MetricScale::Log1p,
        ),
    };
    let observed: Vec<f64> = selected.iter().map(|r| r.observed as f64).collect();
    let metrics = point_metrics(&means, &observed, scale);
    let n = selected.len();
    let coverage = (0..COVERAGE_QUANTILES.len())
        .map(|j| {
            let hits = selected
                .iter()
                .zip(&quantiles)
                .filter(|(r, q)| r.observed <= q[j])
                .count();
            if n == 0 {
                f64::NAN
            } else {
                hits as f64 / n as f64
            }
        })
        .collect();
    ReportRow {
        dataset: dataset.to_string(),
        model,
        lps,
        rmse: metrics.rmse,
        corr: metrics.correlation,
        coverage,
        n,
        complete,
    }
}

/// Fit every (variant, window) cell and aggregate both report flavors.
pub fn run_backtest(series: &CountSeries, plan: &BacktestPlan) -> Result<BacktestReport> {
    plan.mcmc.validate()?;
    if plan.variants.is_empty() {
        return Err(Error::InvalidConfig("no variants to evaluate".into()));
    }
    let windows = rolling_windows(series.len(), plan.n_windows)?;
    let cells: Vec<(InnovationModel, &Window)> = plan
        .variants
        .iter()
        .flat_map(|&m| windows.iter().map(move |w| (m, w)))
        .collect();

    let run = || -> Vec<std::result::Result<WindowRecord, CellFailure>> {
        cells
            .par_iter()
            .map(|&(model, window)| {
                score_window(series, window, model, plan).map_err(|e| {
                    log::warn!("{model} window {} failed: {e}", window.index);
                    CellFailure {
                        model,
                        window: window.index,
                        message: e.to_string(),
                    }
                })
            })
            .collect()
    };
    let outcomes = match plan.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }

    let mut conditional = Vec::new();
    let mut full = Vec::new();
    for &model in &plan.variants {
        let mine: Vec<&WindowRecord> = records.iter().filter(|r| r.model == model).collect();
        let complete = !failures.iter().any(|f| f.model == model);
        conditional.push(aggregate(&plan.dataset, model, &mine, ReportFlavor::Conditional, complete));
        full.push(aggregate(&plan.dataset, model, &mine, ReportFlavor::Full, complete));
    }

    Ok(BacktestReport {
        dataset: plan.dataset.clone(),
        n_windows: plan.n_windows,
        train_length: series.len() - plan.n_windows,
        n_burn: plan.mcmc.n_burn,
        n_draws: plan.mcmc.n_draws,
        master_seed: plan.mcmc.seed,
        conditional,
        full,
        windows: records,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_index_arithmetic() {
        let w = rolling_windows(494, 250).unwrap();
        assert_eq!(w.len(), 250);
        assert_eq!(w[0].train, 0..244);
        assert_eq!(w[249].holdout, 493);

        let w = rolling_windows(12, 2).unwrap();
        assert_eq!(w[0].train, 0..10);
        assert_eq!(w[1].train, 1..11);
        assert_eq!((w[0].holdout, w[1].holdout), (10, 11));

        let w = rolling_windows(30, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].holdout, 29);
    }

    #[test]
    fn too_short_series_is_rejected() {
        assert!(matches!(
            rolling_windows(11, 2),
            Err(Error::SeriesTooShort { len: 11, required: 12 })
        ));
        assert!(rolling_windows(20, 0).is_err());
    }

    #[test]
    fn cell_seeds_are_distinct_and_stable() {
        let a = cell_seed(1, "ita", InnovationModel::StochVol, 3);
        assert_eq!(a, cell_seed(1, "ita", InnovationModel::StochVol, 3));
        assert_ne!(a, cell_seed(1, "ita", InnovationModel::StochVol, 4));
        assert_ne!(a, cell_seed(1, "uk", InnovationModel::StochVol, 3));
        assert_ne!(a, cell_seed(1, "ita", InnovationModel::Gaussian, 3));
        assert_ne!(a, cell_seed(2, "ita", InnovationModel::StochVol, 3));
    }

    fn record(observed: u64, q: u64) -> WindowRecord {
        WindowRecord {
            model: InnovationModel::Gaussian,
            window: 0,
            holdout_index: 0,
            week: crate::count_model::default_start_week(),
            observed,
            seed: 0,
            conditional_lps: -1.0,
            unconditional_lps: -2.0,
            conditional_mean: (observed.max(1)) as f64,
            unconditional_mean: observed as f64,
            conditional_quantiles: vec![q; 6],
            unconditional_quantiles: vec![q; 6],
            latent_acceptance: None,
        }
    }

    #[test]
    fn aggregation_flavors() {
        let recs = [record(0, 3), record(5, 3), record(2, 3), record(9, 20)];
        let refs: Vec<&WindowRecord> = recs.iter().collect();
        let cond = aggregate("d", InnovationModel::Gaussian, &refs, ReportFlavor::Conditional, true);
        assert_eq!(cond.n, 3);
        assert_eq!(cond.lps, -3.0);
        assert_eq!(cond.rmse, 0.0);
        assert!((cond.coverage[0] - 2.0 / 3.0).abs() < 1e-15);

        let full = aggregate("d", InnovationModel::Gaussian, &refs, ReportFlavor::Full, true);
        assert_eq!(full.n, 4);
        assert_eq!(full.lps, -8.0);
        assert_eq!(full.coverage[5], 0.75);
        assert_eq!(full.rmse, 0.0);
    }
}
