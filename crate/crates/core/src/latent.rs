//! Random-walk prior precision and single-site updates of the augmented
//! log-intensity path `(z_0, z_1, ..., z_T, z_{T+1})`, plus the gate
//! indicators `s` and the gate probability `pi`.
//!
//! Indexing: `z[0]` is the initial value, `z[t]` for `1 <= t <= T` pairs with
//! observation `y[t - 1]`, and `z[T + 1]` is the one-step-ahead state.
//! Increment `t` (for `1 <= t <= T + 1`) is `z[t] - z[t - 1]` and has
//! precision `k[t - 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist;
use crate::priors::BetaPrior;
use crate::{Error, Result};

/// Target acceptance rate for every adaptive random-walk step.
pub const TARGET_ACCEPTANCE: f64 = 0.234;
/// Upper bound of the adaptation step size.
pub const MAX_ADAPT_STEP: f64 = 0.05;
pub const INITIAL_PROPOSAL_SCALE: f64 = 0.1;
/// Draws of `pi` are clamped to `[PI_CLAMP, 1 - PI_CLAMP]`.
pub const PI_CLAMP: f64 = 1e-12;

/// `P = D^T K D` for the first-difference operator `D` and
/// `K = diag(k_1, ..., k_{T+1})`, stored by its two bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalPrecision {
    k: Vec<f64>,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagonalPrecision {
    pub fn build(k: &[f64]) -> Result<Self> {
        let mut p = TridiagonalPrecision {
            k: Vec::new(),
            diag: Vec::new(),
            offdiag: Vec::new(),
        };
        p.rebuild(k)?;
        Ok(p)
    }

    /// Rebuild in place from new increment precisions.
    pub fn rebuild(&mut self, k: &[f64]) -> Result<()> {
        if k.is_empty() {
            return Err(Error::InvalidParameter("need at least one increment".into()));
        }
        if let Some((index, &value)) = k
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidPrecision { index, value });
        }
        let n = k.len();
        self.k.clear();
        self.k.extend_from_slice(k);
        self.diag.resize(n + 1, 0.0);
        self.offdiag.resize(n, 0.0);
        self.diag[0] = k[0];
        for t in 1..n {
            self.diag[t] = k[t - 1] + k[t];
        }
        self.diag[n] = k[n - 1];
        for (o, &kt) in self.offdiag.iter_mut().zip(k) {
            *o = -kt;
        }
        Ok(())
    }

    /// Dimension `T + 2`.
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `offdiag[t] = P[t, t + 1]`.
    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// `P x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|t| {
                // Neighbours first: for x = 1 the row sum then cancels exactly.
                let mut acc = 0.0;
                if t > 0 {
                    acc += self.offdiag[t - 1] * x[t - 1];
                }
                if t + 1 < n {
                    acc += self.offdiag[t] * x[t + 1];
                }
                acc + self.diag[t] * x[t]
            })
            .collect()
    }

    /// Mean and variance of `z_t` given all other sites under the
    /// random-walk prior alone.
    pub fn conditional_moments(&self, t: usize, z: &[f64]) -> (f64, f64) {
        let n = self.dim();
        let mut weighted = 0.0;
        if t > 0 {
            weighted += self.offdiag[t - 1] * z[t - 1];
        }
        if t + 1 < n {
            weighted += self.offdiag[t] * z[t + 1];
        }
        let ptt = self.diag[t];
        (-weighted / ptt, 1.0 / ptt)
    }
}

/// `log sd <- log sd + gamma_n (accepted - target)` with
/// `gamma_n = min(0.05, n^{-1/2})`.
pub fn adapt_log_scale(log_scale: f64, accepted: bool, n: u64) -> f64 {
    let n = n.max(1) as f64;
    let gamma = MAX_ADAPT_STEP.min(n.powf(-0.5));
    let hit = if accepted { 1.0 } else { 0.0 };
    log_scale + gamma * (hit - TARGET_ACCEPTANCE)
}

/// A single adaptive random-walk proposal scale with its own counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveScale {
    log_scale: f64,
    attempts: u64,
    accepts: u64,
}

impl AdaptiveScale {
    pub fn new(scale: f64) -> Self {
        AdaptiveScale {
            log_scale: scale.ln(),
            attempts: 0,
            accepts: 0,
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn record(&mut self, accepted: bool) {
        self.attempts += 1;
        self.accepts += accepted as u64;
        self.log_scale = adapt_log_scale(self.log_scale, accepted, self.attempts);
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| self.accepts as f64 / self.attempts as f64)
    }

    pub fn reset_counts(&mut self) {
        self.attempts = 0;
        self.accepts = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteUpdate {
    /// Exact draw from the Gaussian conditional.
    Exact,
    Accepted,
    Rejected,
}

/// Log-intensity path, gate indicators and gate probability of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub z: Vec<f64>,
    pub s: Vec<bool>,
    pub pi: f64,
    pub proposal_scales: Vec<f64>,
    pub accept_counts: Vec<u64>,
    pub attempt_counts: Vec<u64>,
}

impl LatentState {
    /// Starting state for a series of length `n_obs`.
    pub fn new(y: &[u64], pi: f64) -> Self {
        let n_obs = y.len();
        let level = (y.iter().map(|&v| v as f64).sum::<f64>() / n_obs.max(1) as f64).ln_1p();
        let mut z = Vec::with_capacity(n_obs + 2);
        z.push(level);
        z.extend(y.iter().map(|&v| if v > 0 { (v as f64).ln() } else { level }));
        z.push(*z.last().unwrap());
        LatentState {
            z,
            s: vec![true; n_obs],
            pi,
            proposal_scales: vec![INITIAL_PROPOSAL_SCALE; n_obs + 2],
            accept_counts: vec![0; n_obs + 2],
            attempt_counts: vec![0; n_obs + 2],
        }
    }

    pub fn n_obs(&self) -> usize {
        self.s.len()
    }

    pub fn reset_counts(&mut self) {
        self.accept_counts.iter_mut().for_each(|c| *c = 0);
        self.attempt_counts.iter_mut().for_each(|c| *c = 0);
    }

    /// Pooled acceptance over all Metropolis-updated sites.
    pub fn acceptance_rate(&self) -> Option<f64> {
        let attempts: u64 = self.attempt_counts.iter().sum();
        (attempts > 0).then(|| self.accept_counts.iter().sum::<u64>() as f64 / attempts as f64)
    }
}

/// Unnormalized log conditional of a site on the sampling path.
#[inline]
fn site_log_target(x: f64, mean: f64, var: f64, y: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var + y * x - x.exp()
}

/// One update of `z_t`.
///
/// Sites without an active observation (including `t = 0` and `t = T + 1`)
/// are drawn exactly from `N(m_t, v_t)`. Active sites take one adaptive
/// random-walk Metropolis step against `N(m_t, v_t) Poisson(y_t; e^{z_t})`.
/// `z0_prior` optionally adds a proper Gaussian prior at `t = 0`.
pub fn update_latent_site<R: Rng + ?Sized>(
    state: &mut LatentState,
    t: usize,
    y: &[u64],
    precision: &TridiagonalPrecision,
    z0_prior: Option<(f64, f64)>,
    iteration: u64,
    rng: &mut R,
) -> SiteUpdate {
    let (mut mean, mut var) = precision.conditional_moments(t, &state.z);
    if t == 0 {
        if let Some((m0, v0)) = z0_prior {
            let prec = 1.0 / var + 1.0 / v0;
            mean = (mean / var + m0 / v0) / prec;
            var = 1.0 / prec;
        }
    }
    let n_obs = state.n_obs();
    let observed = t >= 1 && t <= n_obs && state.s[t - 1];
    if !observed {
        state.z[t] = dist::normal(rng, mean, var.sqrt());
        return SiteUpdate::Exact;
    }

    let count = y[t - 1] as f64;
    let current = state.z[t];
    let scale = state.proposal_scales[t];
    let proposal = current + scale * dist::std_normal(rng);
    let log_ratio = site_log_target(proposal, mean, var, count)
        - site_log_target(current, mean, var, count);
    let accepted = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accepted {
        state.z[t] = proposal;
    }
    state.attempt_counts[t] += 1;
    state.accept_counts[t] += accepted as u64;
    state.proposal_scales[t] = adapt_log_scale(scale.ln(), accepted, iteration).exp();
    if accepted {
        SiteUpdate::Accepted
    } else {
        SiteUpdate::Rejected
    }
}

/// Probability that a zero count came from the sampling path.
pub fn active_probability_given_zero(z: f64, pi: f64) -> f64 {
    let p0 = (-z.exp()).exp();
    let active = pi * p0;
    active / ((1.0 - pi) + active)
}

/// Redraw the gate indicators; positive counts always keep the gate open.
pub fn update_indicators<R: Rng + ?Sized>(
    y: &[u64],
    z: &[f64],
    pi: f64,
    s: &mut [bool],
    rng: &mut R,
) {
    for (t, (&count, gate)) in y.iter().zip(s.iter_mut()).enumerate() {
        *gate = count > 0 || dist::bernoulli(rng, active_probability_given_zero(z[t + 1], pi));
    }
}

/// Draw `pi` from its Beta full conditional.
pub fn update_pi<R: Rng + ?Sized>(s: &[bool], prior: &BetaPrior, rng: &mut R) -> f64 {
    let active = s.iter().filter(|&&v| v).count() as f64;
    let inactive = s.len() as f64 - active;
    dist::beta(rng, prior.a + active, prior.b + inactive).clamp(PI_CLAMP, 1.0 - PI_CLAMP)
}
