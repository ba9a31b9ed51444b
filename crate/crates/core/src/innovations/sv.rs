//! Stochastic volatility increments: `dz_t ~ N(0, exp(h_t))` with
//! `h_t = mu + phi (h_{t-1} - mu) + xi_t`, `xi_t ~ N(0, sigma_xi2)` and
//! `h_1` drawn from the stationary distribution.
//!
//! The log-variance path is sampled with the auxiliary mixture approach of
//! Kim, Shephard and Chib (1998): `u_t = log(dz_t^2 + c) = h_t + log zeta_t^2`
//! where `log zeta_t^2` (log chi-square with one degree of freedom) is
//! approximated by a 7-component normal mixture. Given the mixture
//! indicators the path is jointly Gaussian with tridiagonal precision and is
//! drawn in one block.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist;
use crate::latent::AdaptiveScale;
use crate::priors::Priors;
use crate::tridiag::TridiagCholesky;

/// Mixture weights for the log chi-square(1) approximation.
pub const KSC_WEIGHTS: [f64; 7] = [0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750];
/// Component means before the common shift [`KSC_MEAN_SHIFT`].
pub const KSC_MEANS: [f64; 7] = [
    -10.12999, -3.97281, -8.56686, 2.77786, 0.61942, 1.79518, -1.08819,
];
pub const KSC_VARIANCES: [f64; 7] = [5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261];
pub const KSC_MEAN_SHIFT: f64 = -1.2704;

/// Offset inside `log(dz^2 + c)`; increments can be exactly zero.
pub const SV_OFFSET: f64 = 1e-6;

pub const INITIAL_MU: f64 = 0.0;
pub const INITIAL_PHI: f64 = 0.9;
pub const INITIAL_SIGMA_XI2: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvState {
    /// Log-variances `h_1..h_{T+1}`.
    pub h: Vec<f64>,
    pub mu: f64,
    pub phi: f64,
    pub sigma_xi2: f64,
    /// Mixture component per increment.
    pub indicators: Vec<u8>,
    phi_attempts: u64,
    phi_accepts: u64,
    sigma_attempts: u64,
    sigma_accepts: u64,
    /// Fallback random-walk scale for `log sigma_xi2`, used when the
    /// inverse-Gamma independence proposal is not proper.
    sigma_rw: AdaptiveScale,
    #[serde(skip)]
    work: SvWork,
}

#[derive(Debug, Clone, Default)]
struct SvWork {
    u: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    rhs: Vec<f64>,
    chol: TridiagCholesky,
}

// Scratch buffers carry no state.
impl PartialEq for SvWork {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl SvState {
    pub fn new(n_increments: usize) -> Self {
        Self::with_params(vec![0.0; n_increments], INITIAL_MU, INITIAL_PHI, INITIAL_SIGMA_XI2)
    }

    pub fn with_params(h: Vec<f64>, mu: f64, phi: f64, sigma_xi2: f64) -> Self {
        let n = h.len();
        SvState {
            h,
            mu,
            phi,
            sigma_xi2,
            indicators: vec![0; n],
            phi_attempts: 0,
            phi_accepts: 0,
            sigma_attempts: 0,
            sigma_accepts: 0,
            sigma_rw: AdaptiveScale::new(0.1),
            work: SvWork::default(),
        }
    }

    pub fn sample_prior<R: Rng + ?Sized>(n_increments: usize, priors: &Priors, rng: &mut R) -> Self {
        let mu = priors.mu.sample(rng);
        let phi = 2.0 * priors.phi.sample(rng) - 1.0;
        let sigma_xi2 = priors.sigma_xi2.sample(rng);
        let h = simulate_ar1(n_increments, mu, phi, sigma_xi2, rng);
        Self::with_params(h, mu, phi, sigma_xi2)
    }

    /// Stationary variance `sigma_xi2 / (1 - phi^2)`.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma_xi2 / (1.0 - self.phi * self.phi)
    }

    pub fn acceptance_rates(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if self.phi_attempts > 0 {
            out.push(("phi", self.phi_accepts as f64 / self.phi_attempts as f64));
        }
        if self.sigma_attempts > 0 {
            out.push(("sigma_xi2", self.sigma_accepts as f64 / self.sigma_attempts as f64));
        }
        out
    }

    pub fn reset_counts(&mut self) {
        self.phi_attempts = 0;
        self.phi_accepts = 0;
        self.sigma_attempts = 0;
        self.sigma_accepts = 0;
    }

    /// Transform, indicators, joint path, then `mu`, `phi`, `sigma_xi2`.
    pub fn update<R: Rng + ?Sized>(&mut self, increments: &[f64], priors: &Priors, rng: &mut R) {
        let mut work = std::mem::take(&mut self.work);
        work.u.clear();
        work.u.extend(increments.iter().map(|d| (d * d + SV_OFFSET).ln()));

        for (t, &u) in work.u.iter().enumerate() {
            let probs = ksc_indicator_probs(u - self.h[t]);
            self.indicators[t] = dist::categorical(rng, &probs) as u8;
        }
        self.sample_path(&mut work, rng);
        self.update_mu(priors, rng);
        self.update_phi(priors, rng);
        self.update_sigma_xi2(priors, rng);
        self.work = work;
    }

    /// Draw `h | u, indicators, mu, phi, sigma_xi2` in one block.
    fn sample_path<R: Rng + ?Sized>(&mut self, work: &mut SvWork, rng: &mut R) {
        let n = self.h.len();
        let (mu, phi, s2) = (self.mu, self.phi, self.sigma_xi2);
        work.diag.resize(n, 0.0);
        work.off.resize(n.saturating_sub(1), 0.0);
        work.rhs.resize(n, 0.0);
        for t in 0..n {
            let (prior_diag, prior_rowsum) = if n == 1 {
                (1.0 - phi * phi, 1.0 - phi * phi)
            } else if t == 0 || t == n - 1 {
                (1.0, 1.0 - phi)
            } else {
                (1.0 + phi * phi, (1.0 - phi) * (1.0 - phi))
            };
            let j = self.indicators[t] as usize;
            let obs_var = KSC_VARIANCES[j];
            let obs_mean = KSC_MEANS[j] + KSC_MEAN_SHIFT;
            work.diag[t] = prior_diag / s2 + 1.0 / obs_var;
            work.rhs[t] = (work.u[t] - obs_mean) / obs_var + mu * prior_rowsum / s2;
        }
        work.off.fill(-phi / s2);
        if work.chol.refactor(&work.diag, &work.off) {
            work.chol.sample_in_place(&mut work.rhs, rng);
            self.h.copy_from_slice(&work.rhs);
        }
    }

    fn update_mu<R: Rng + ?Sized>(&mut self, priors: &Priors, rng: &mut R) {
        let (phi, s2) = (self.phi, self.sigma_xi2);
        let n = self.h.len() as f64;
        let mut precision = 1.0 / priors.mu.var + (1.0 - phi * phi) / s2;
        let mut weighted = priors.mu.mean / priors.mu.var + (1.0 - phi * phi) * self.h[0] / s2;
        let transitions: f64 = self.h.windows(2).map(|w| w[1] - phi * w[0]).sum();
        precision += (n - 1.0) * (1.0 - phi) * (1.0 - phi) / s2;
        weighted += (1.0 - phi) * transitions / s2;
        self.mu = dist::normal(rng, weighted / precision, precision.recip().sqrt());
    }

    /// Part of the `phi` conditional not covered by the regression proposal:
    /// prior on `(phi + 1) / 2` and the stationary density of `h_1`.
    fn phi_log_correction(&self, phi: f64, priors: &Priors) -> f64 {
        let one_minus = 1.0 - phi * phi;
        let d = self.h[0] - self.mu;
        priors.phi.log_kernel(0.5 * (phi + 1.0)) + 0.5 * one_minus.ln()
            - one_minus * d * d / (2.0 * self.sigma_xi2)
    }

    fn update_phi<R: Rng + ?Sized>(&mut self, priors: &Priors, rng: &mut R) {
        if self.h.len() < 2 {
            return;
        }
        let (sxx, sxy) = self.h.windows(2).fold((0.0, 0.0), |(sxx, sxy), w| {
            let x = w[0] - self.mu;
            (sxx + x * x, sxy + x * (w[1] - self.mu))
        });
        if !(sxx > 0.0) {
            return;
        }
        self.phi_attempts += 1;
        let proposal = dist::normal(rng, sxy / sxx, (self.sigma_xi2 / sxx).sqrt());
        if proposal.abs() >= 1.0 {
            return;
        }
        let log_alpha = self.phi_log_correction(proposal, priors) - self.phi_log_correction(self.phi, priors);
        if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
            self.phi = proposal;
            self.phi_accepts += 1;
        }
    }

    /// Sum of squared standardized AR(1) residuals times `sigma_xi2`.
    fn ar_sum_of_squares(&self) -> f64 {
        let (mu, phi) = (self.mu, self.phi);
        let d0 = self.h[0] - mu;
        let transitions: f64 = self
            .h
            .windows(2)
            .map(|w| {
                let e = (w[1] - mu) - phi * (w[0] - mu);
                e * e
            })
            .sum();
        (1.0 - phi * phi) * d0 * d0 + transitions
    }

    fn update_sigma_xi2<R: Rng + ?Sized>(&mut self, priors: &Priors, rng: &mut R) {
        let n = self.h.len() as f64;
        let ss = self.ar_sum_of_squares();
        let prior = priors.sigma_xi2;
        // Conditional: x^(a - n/2 - 1) exp(-ss / (2x) - b x).
        let ig_shape = 0.5 * n - prior.shape;
        self.sigma_attempts += 1;
        if ig_shape > 0.0 {
            let proposal = dist::inv_gamma(rng, ig_shape, 0.5 * ss);
            let log_alpha = -prior.rate * (proposal - self.sigma_xi2);
            if proposal.is_finite()
                && proposal > 0.0
                && (log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha)
            {
                self.sigma_xi2 = proposal;
                self.sigma_accepts += 1;
            }
        } else {
            let log_target = |x: f64| (prior.shape - 0.5 * n) * x.ln() - ss / (2.0 * x) - prior.rate * x;
            let current = self.sigma_xi2;
            let proposal = (current.ln() + self.sigma_rw.scale() * dist::std_normal(rng)).exp();
            let log_alpha = log_target(proposal) - log_target(current);
            let accepted = log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha;
            if accepted {
                self.sigma_xi2 = proposal;
                self.sigma_accepts += 1;
            }
            self.sigma_rw.record(accepted);
        }
    }
}

/// Posterior probabilities of the 7 mixture components given the residual
/// `e = u_t - h_t`.
pub fn ksc_indicator_probs(e: f64) -> [f64; 7] {
    let mut logs = [0.0; 7];
    for j in 0..7 {
        let d = e - KSC_MEANS[j] - KSC_MEAN_SHIFT;
        logs[j] = KSC_WEIGHTS[j].ln() - 0.5 * KSC_VARIANCES[j].ln() - 0.5 * d * d / KSC_VARIANCES[j];
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = [0.0; 7];
    let mut total = 0.0;
    for j in 0..7 {
        probs[j] = (logs[j] - top).exp();
        total += probs[j];
    }
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// Stationary AR(1) path of length `n`.
pub fn simulate_ar1<R: Rng + ?Sized>(n: usize, mu: f64, phi: f64, sigma_xi2: f64, rng: &mut R) -> Vec<f64> {
    let mut h = Vec::with_capacity(n);
    if n == 0 {
        return h;
    }
    let sd = sigma_xi2.sqrt();
    h.push(dist::normal(rng, mu, (sigma_xi2 / (1.0 - phi * phi)).sqrt()));
    for t in 1..n {
        let prev = h[t - 1];
        h.push(mu + phi * (prev - mu) + sd * dist::std_normal(rng));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ChainRng;
    use rand::SeedableRng;

    #[test]
    fn mixture_constants() {
        let total: f64 = KSC_WEIGHTS.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Moments of log chi-square(1): mean psi(1/2) + ln 2, variance pi^2 / 2.
        let mean: f64 = (0..7).map(|j| KSC_WEIGHTS[j] * (KSC_MEANS[j] + KSC_MEAN_SHIFT)).sum();
        let second: f64 = (0..7)
            .map(|j| KSC_WEIGHTS[j] * (KSC_VARIANCES[j] + (KSC_MEANS[j] + KSC_MEAN_SHIFT).powi(2)))
            .sum();
        let var = second - mean * mean;
        assert!((mean - (-1.270_362_845)).abs() < 1e-3, "{mean}");
        assert!((var - std::f64::consts::PI.powi(2) / 2.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn indicator_probs_follow_bayes_rule() {
        let mut rng = ChainRng::seed_from_u64(6);
        for _ in 0..200 {
            let e = dist::normal(&mut rng, -1.0, 3.0);
            let p = ksc_indicator_probs(e);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let joint: Vec<f64> = (0..7)
                .map(|j| {
                    KSC_WEIGHTS[j]
                        * dist::normal_log_pdf(e, KSC_MEANS[j] + KSC_MEAN_SHIFT, KSC_VARIANCES[j]).exp()
                })
                .collect();
            let total: f64 = joint.iter().sum();
            for j in 0..7 {
                assert!((p[j] - joint[j] / total).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ar1_stationary_variance() {
        let mut rng = ChainRng::seed_from_u64(8);
        let h = simulate_ar1(10, 0.0, 0.0, 0.7, &mut rng);
        assert_eq!(h.len(), 10);
        let state = SvState::with_params(vec![0.0; 3], 0.0, 0.0, 0.7);
        assert_eq!(state.stationary_variance(), 0.7);

        // phi = 0.9, sigma_xi2 = 0.19: variance 1.
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut count = 0.0;
        for _ in 0..(n / 1000) {
            for v in simulate_ar1(1000, 0.0, 0.9, 0.19, &mut rng) {
                sum += v;
                sum2 += v * v;
                count += 1.0;
            }
        }
        let var = sum2 / count - (sum / count).powi(2);
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn recovers_parameters_from_exact_increments() {
        let mut rng = ChainRng::seed_from_u64(2024);
        let (mu, phi, s2) = (-1.0, 0.95, 0.05);
        let h_true = simulate_ar1(500, mu, phi, s2, &mut rng);
        let dz: Vec<f64> = h_true.iter().map(|h| (0.5 * h).exp() * dist::std_normal(&mut rng)).collect();
        let priors = Priors::default();
        let mut state = SvState::new(dz.len());
        let mut mus = Vec::new();
        let mut phis = Vec::new();
        for it in 0..6_000 {
            state.update(&dz, &priors, &mut rng);
            if it >= 1_000 {
                mus.push(state.mu);
                phis.push(state.phi);
            }
        }
        for (draws, truth) in [(&mut mus, mu), (&mut phis, phi)] {
            draws.sort_by(f64::total_cmp);
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let lo = draws[(0.025 * draws.len() as f64) as usize];
            let hi = draws[(0.975 * draws.len() as f64) as usize];
            assert!(lo <= mean && mean <= hi);
            assert!(lo <= truth && truth <= hi, "truth {truth} outside [{lo}, {hi}]");
        }
    }
}
