//! Scaled Student-t increments through the scale-mixture representation
//! `dz_t | omega_t ~ N(0, sigma2 / omega_t)`, `omega_t ~ Gamma(nu/2, nu/2)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dist;
use crate::innovations::gaussian::sigma2_posterior;
use crate::latent::AdaptiveScale;
use crate::priors::{Priors, ShiftedExpPrior};

pub const INITIAL_NU: f64 = 10.0;
pub const INITIAL_NU_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentTState {
    pub sigma2: f64,
    pub nu: f64,
    pub omega: Vec<f64>,
    /// Adaptive random-walk scale of `log nu` proposals.
    pub nu_scale: AdaptiveScale,
}

impl StudentTState {
    pub fn new(n_increments: usize) -> Self {
        StudentTState {
            sigma2: 1.0,
            nu: INITIAL_NU,
            omega: vec![1.0; n_increments],
            nu_scale: AdaptiveScale::new(INITIAL_NU_SCALE),
        }
    }

    pub fn sample_prior<R: Rng + ?Sized>(n_increments: usize, priors: &Priors, rng: &mut R) -> Self {
        let nu = priors.nu.sample(rng);
        StudentTState {
            sigma2: priors.sigma2.sample(rng),
            nu,
            omega: (0..n_increments).map(|_| dist::gamma(rng, 0.5 * nu, 0.5 * nu)).collect(),
            nu_scale: AdaptiveScale::new(INITIAL_NU_SCALE),
        }
    }

    /// omega, then sigma2, then nu.
    pub fn update<R: Rng + ?Sized>(&mut self, increments: &[f64], priors: &Priors, rng: &mut R) {
        let (omega, sigma2) = student_t_update(increments, self.nu, self.sigma2, priors, rng);
        self.omega = omega;
        self.sigma2 = sigma2;
        let (nu, accepted) = nu_mh_step(self.nu, &self.omega, self.nu_scale.scale(), &priors.nu, rng);
        self.nu = nu;
        self.nu_scale.record(accepted);
    }
}

/// Shape and rate of `omega_t | nu, sigma2, dz_t`.
pub fn omega_posterior(nu: f64, sigma2: f64, dz: f64) -> (f64, f64) {
    (0.5 * (1.0 + nu), 0.5 * nu + dz * dz / (2.0 * sigma2))
}

/// Draw `omega | nu, sigma2, z` and then `sigma2 | omega, z`.
pub fn student_t_update<R: Rng + ?Sized>(
    increments: &[f64],
    nu: f64,
    sigma2: f64,
    priors: &Priors,
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let omega: Vec<f64> = increments
        .iter()
        .map(|&dz| {
            let (shape, rate) = omega_posterior(nu, sigma2, dz);
            dist::gamma(rng, shape, rate)
        })
        .collect();
    let weighted: f64 = omega.iter().zip(increments).map(|(w, d)| w * d * d).sum();
    let (shape, rate) = sigma2_posterior(&priors.sigma2, increments.len(), weighted);
    (omega, dist::inv_gamma(rng, shape, rate))
}

/// `log p(omega | nu) + log p(nu)`.
pub fn nu_log_conditional(nu: f64, omega: &[f64], prior: &ShiftedExpPrior) -> f64 {
    let log_prior = prior.log_density(nu);
    if log_prior == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let half = 0.5 * nu;
    let n = omega.len() as f64;
    let (sum_log, sum) = omega
        .iter()
        .fold((0.0, 0.0), |(l, s), &w| (l + w.ln(), s + w));
    n * (half * half.ln() - ln_gamma(half)) + (half - 1.0) * sum_log - half * sum + log_prior
}

/// Log acceptance ratio of moving from `nu` to `proposal` under the
/// log-scale random walk (including the `proposal / nu` Jacobian).
pub fn nu_log_acceptance(nu: f64, proposal: f64, omega: &[f64], prior: &ShiftedExpPrior) -> f64 {
    let target = nu_log_conditional(proposal, omega, prior);
    if target == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    (proposal / nu).ln() + target - nu_log_conditional(nu, omega, prior)
}

/// One random-walk Metropolis step on `log nu`. Returns the new value and
/// whether the proposal was accepted.
pub fn nu_mh_step<R: Rng + ?Sized>(
    nu: f64,
    omega: &[f64],
    scale: f64,
    prior: &ShiftedExpPrior,
    rng: &mut R,
) -> (f64, bool) {
    let proposal = (nu.ln() + scale * dist::std_normal(rng)).exp();
    let log_alpha = nu_log_acceptance(nu, proposal, omega, prior);
    if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
        (proposal, true)
    } else {
        (nu, false)
    }
}
