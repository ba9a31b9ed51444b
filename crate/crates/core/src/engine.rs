//! The Gibbs-Metropolis sampler.
//!
//! One sweep updates, in order: every latent site `t = 0..=T+1` (block i),
//! the gate indicators (ii), `pi` (iii) and the innovation model's
//! parameters (iv). After burn-in each sweep also produces one draw from the
//! posterior predictive of `y_{T+1}`; those are streamed into the
//! [`DrawStore`] so that full latent paths only need to be kept thinned.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::count_model::{poisson_log_pmf, zip_log_pmf, CountSeries};
use crate::dist;
use crate::innovations::{increments_into, mixture, InnovationModel, InnovationState};
use crate::latent::{
    update_indicators, update_latent_site, update_pi, LatentState, TridiagonalPrecision,
};
use crate::priors::Priors;
use crate::{ChainRng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_burn: usize,
    pub n_draws: usize,
    /// Thinning of stored latent paths; scalar traces and predictive draws
    /// keep every draw.
    pub thin: usize,
    pub seed: u64,
    pub model: InnovationModel,
    pub priors: Priors,
    pub mixture_components: usize,
    /// Keep thinned `z` (and `h`) paths.
    pub store_paths: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_burn: 5_000,
            n_draws: 50_000,
            thin: 10,
            seed: 0,
            model: InnovationModel::StochVol,
            priors: Priors::default(),
            mixture_components: mixture::DEFAULT_COMPONENTS,
            store_paths: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::InvalidConfig("n_draws must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if self.model == InnovationModel::Mixture && self.mixture_components < 2 {
            return Err(Error::InvalidConfig("mixture needs at least 2 components".into()));
        }
        self.priors.validate()
    }
}

/// Mutable state of one chain plus its reusable work buffers.
#[derive(Debug, Clone)]
pub struct Chain {
    pub latent: LatentState,
    pub innovation: InnovationState,
    z0_prior: Option<(f64, f64)>,
    precision: TridiagonalPrecision,
    k: Vec<f64>,
    increments: Vec<f64>,
    iteration: u64,
}

impl Chain {
    /// Default starting values for the series `y`.
    pub fn new<R: Rng + ?Sized>(y: &[u64], config: &McmcConfig, z0_prior: Option<(f64, f64)>, rng: &mut R) -> Result<Self> {
        let latent = LatentState::new(y, 0.5);
        let innovation = InnovationState::init(config.model, y.len() + 1, config.mixture_components, rng)?;
        Self::from_parts(latent, innovation, z0_prior)
    }

    pub fn from_parts(latent: LatentState, innovation: InnovationState, z0_prior: Option<(f64, f64)>) -> Result<Self> {
        let n_incr = latent.n_obs() + 1;
        if innovation.n_increments() != n_incr || latent.z.len() != n_incr + 1 {
            return Err(Error::InvalidParameter(format!(
                "state sizes disagree: {} sites, {} increments",
                latent.z.len(),
                innovation.n_increments()
            )));
        }
        let k = innovation.precisions()?;
        let precision = TridiagonalPrecision::build(&k)?;
        Ok(Chain {
            latent,
            innovation,
            z0_prior,
            precision,
            k,
            increments: Vec::with_capacity(n_incr),
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// One full Gibbs sweep over blocks i-iv.
    pub fn sweep<R: Rng + ?Sized>(&mut self, y: &[u64], priors: &Priors, rng: &mut R) -> Result<()> {
        self.iteration += 1;
        let it = self.iteration;
        let fail = |block: &'static str, detail: String| Error::Numerical {
            block,
            iteration: it as usize,
            detail,
        };

        self.innovation
            .precisions_into(&mut self.k)
            .map_err(|e| fail("latent", e.to_string()))?;
        self.precision
            .rebuild(&self.k)
            .map_err(|e| fail("latent", e.to_string()))?;
        for t in 0..self.latent.z.len() {
            update_latent_site(&mut self.latent, t, y, &self.precision, self.z0_prior, it, rng);
            if !self.latent.z[t].is_finite() {
                return Err(fail("latent", format!("z[{t}] = {}", self.latent.z[t])));
            }
        }

        update_indicators(y, &self.latent.z, self.latent.pi, &mut self.latent.s, rng);
        self.latent.pi = update_pi(&self.latent.s, &priors.pi, rng);

        increments_into(&self.latent.z, &mut self.increments);
        self.innovation.update(&self.increments, priors, rng);
        let mut values = Vec::new();
        self.innovation.scalar_values(&mut values);
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(fail("innovations", format!("non-finite parameter {v}")));
        }
        Ok(())
    }

    /// Log-intensity of the one-step-ahead state.
    pub fn z_next(&self) -> f64 {
        *self.latent.z.last().expect("non-empty path")
    }

    pub fn reset_counts(&mut self) {
        self.latent.reset_counts();
        self.innovation.reset_counts();
    }
}

/// Streamed posterior predictive draws of `y_{T+1}`, one per retained sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDraws {
    /// Draws conditional on `s_{T+1} = 1`.
    pub conditional: Vec<u64>,
    /// Draws through the gate; shares the Poisson draw with `conditional`.
    pub unconditional: Vec<u64>,
    /// Running mean of `exp(z_{T+1})`.
    pub conditional_mean: f64,
    /// Running mean of `pi exp(z_{T+1})`.
    pub unconditional_mean: f64,
    pub holdout: Option<u64>,
    /// Per-draw `log Poisson(holdout; exp(z_{T+1}))`.
    pub conditional_log_density: Vec<f64>,
    /// Per-draw zero-inflated log density at the hold-out.
    pub unconditional_log_density: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    /// Pooled over all Metropolis-updated latent sites.
    pub latent: Option<f64>,
    /// Per site `t = 0..=T+1`; `None` for sites never updated by Metropolis.
    pub latent_sites: Vec<Option<f64>>,
    /// Metropolis steps inside the innovation block.
    pub hyperparameters: BTreeMap<String, f64>,
}

/// Output of one chain after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawStore {
    pub model: InnovationModel,
    pub n_obs: usize,
    pub n_burn: usize,
    pub n_draws: usize,
    pub thin: usize,
    /// Full-resolution scalar traces: `pi`, the model's parameters and
    /// `z_next`.
    pub traces: BTreeMap<String, Vec<f64>>,
    /// Thinned log-intensity paths `z_0..z_{T+1}`.
    pub z_paths: Vec<Vec<f64>>,
    /// Thinned log-variance paths `h_1..h_{T+1}` (SV only).
    pub h_paths: Vec<Vec<f64>>,
    /// Posterior frequency of `s_t = 1` per observation.
    pub active_probability: Vec<f64>,
    pub predictive: PredictiveDraws,
    pub acceptance: AcceptanceSummary,
}

impl DrawStore {
    pub fn trace(&self, name: &str) -> Option<&[f64]> {
        self.traces.get(name).map(Vec::as_slice)
    }

    pub fn posterior_mean(&self, name: &str) -> Option<f64> {
        self.trace(name)
            .filter(|t| !t.is_empty())
            .map(|t| t.iter().sum::<f64>() / t.len() as f64)
    }
}

/// Run one chain on `data`.
pub fn run_chain(data: &CountSeries, config: &McmcConfig) -> Result<DrawStore> {
    run_chain_with_holdout(data, config, None)
}

/// Run one chain and, if `holdout` is given, record per-draw predictive
/// log densities at that value.
pub fn run_chain_with_holdout(data: &CountSeries, config: &McmcConfig, holdout: Option<u64>) -> Result<DrawStore> {
    config.validate()?;
    let mut rng = ChainRng::seed_from_u64(config.seed);
    let y = data.counts();
    let z0_prior = config.priors.z0.resolve(data.mean_positive());
    let mut chain = Chain::new(y, config, z0_prior, &mut rng)?;

    for _ in 0..config.n_burn {
        chain.sweep(y, &config.priors, &mut rng)?;
    }
    chain.reset_counts();

    let n_obs = y.len();
    let names = chain.innovation.scalar_names();
    let mut scalar_traces: Vec<Vec<f64>> = vec![Vec::with_capacity(config.n_draws); names.len()];
    let mut pi_trace = Vec::with_capacity(config.n_draws);
    let mut z_next_trace = Vec::with_capacity(config.n_draws);
    let mut active = vec![0u64; n_obs];
    let mut z_paths = Vec::new();
    let mut h_paths = Vec::new();
    let mut predictive = PredictiveDraws {
        conditional: Vec::with_capacity(config.n_draws),
        unconditional: Vec::with_capacity(config.n_draws),
        holdout,
        ..PredictiveDraws::default()
    };
    let mut values = Vec::new();

    for d in 0..config.n_draws {
        chain.sweep(y, &config.priors, &mut rng)?;

        chain.innovation.scalar_values(&mut values);
        for (trace, &v) in scalar_traces.iter_mut().zip(&values) {
            trace.push(v);
        }
        let pi = chain.latent.pi;
        let z_next = chain.z_next();
        pi_trace.push(pi);
        z_next_trace.push(z_next);
        for (count, &gate) in active.iter_mut().zip(&chain.latent.s) {
            *count += gate as u64;
        }

        let lambda = z_next.exp();
        let y_cond = dist::poisson(&mut rng, lambda);
        let gate = dist::bernoulli(&mut rng, pi);
        predictive.conditional.push(y_cond);
        predictive.unconditional.push(if gate { y_cond } else { 0 });
        let w = 1.0 / (d + 1) as f64;
        predictive.conditional_mean += w * (lambda - predictive.conditional_mean);
        predictive.unconditional_mean += w * (pi * lambda - predictive.unconditional_mean);
        if let Some(value) = holdout {
            predictive
                .conditional_log_density
                .push(poisson_log_pmf(value, z_next)?);
            predictive
                .unconditional_log_density
                .push(zip_log_pmf(value, z_next, pi)?);
        }

        if config.store_paths && d % config.thin == 0 {
            z_paths.push(chain.latent.z.clone());
            if let Some(h) = chain.innovation.log_variances() {
                h_paths.push(h.to_vec());
            }
        }
    }

    let mut traces: BTreeMap<String, Vec<f64>> = names.into_iter().zip(scalar_traces).collect();
    traces.insert("pi".into(), pi_trace);
    traces.insert("z_next".into(), z_next_trace);

    let latent_sites = chain
        .latent
        .attempt_counts
        .iter()
        .zip(&chain.latent.accept_counts)
        .map(|(&n, &a)| (n > 0).then(|| a as f64 / n as f64))
        .collect();
    let acceptance = AcceptanceSummary {
        latent: chain.latent.acceptance_rate(),
        latent_sites,
        hyperparameters: chain
            .innovation
            .acceptance_rates()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    };

    Ok(DrawStore {
        model: config.model,
        n_obs,
        n_burn: config.n_burn,
        n_draws: config.n_draws,
        thin: config.thin,
        traces,
        z_paths,
        h_paths,
        active_probability: active
            .iter()
            .map(|&c| c as f64 / config.n_draws as f64)
            .collect(),
        predictive,
        acceptance,
    })
}
