//! Finite Gaussian scale mixture: `dz_t | rho_t = h ~ N(0, sigma2 * sigma2_h[h])`.
//!
//! Component labels are not identified (no ordering constraint on
//! `sigma2_h`); only the implied increment variances are meaningful.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist;
use crate::innovations::gaussian::sigma2_posterior;
use crate::priors::Priors;
use crate::{Error, Result};

pub const DEFAULT_COMPONENTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    pub sigma2: f64,
    pub eta: Vec<f64>,
    pub sigma2_h: Vec<f64>,
    /// Zero-based component index per increment.
    pub rho: Vec<usize>,
}

fn check_components(components: usize) -> Result<()> {
    if components < 2 {
        return Err(Error::InvalidConfig(format!(
            "mixture needs at least 2 components, got {components}"
        )));
    }
    Ok(())
}

impl MixtureState {
    /// Starting values: equal weights, component scales spread between 0.5
    /// and 2, allocations uniform at random.
    pub fn new<R: Rng + ?Sized>(n_increments: usize, components: usize, rng: &mut R) -> Result<Self> {
        check_components(components)?;
        let sigma2_h = (0..components)
            .map(|h| 0.5 * 4f64.powf(h as f64 / (components - 1) as f64))
            .collect();
        Ok(MixtureState {
            sigma2: 1.0,
            eta: vec![1.0 / components as f64; components],
            sigma2_h,
            rho: (0..n_increments).map(|_| rng.random_range(0..components)).collect(),
        })
    }

    pub fn sample_prior<R: Rng + ?Sized>(
        n_increments: usize,
        components: usize,
        priors: &Priors,
        rng: &mut R,
    ) -> Result<Self> {
        check_components(components)?;
        let eta = dist::dirichlet(rng, &vec![priors.eta_concentration; components]);
        let sigma2_h = (0..components).map(|_| priors.sigma2_h.sample(rng)).collect();
        let rho = (0..n_increments).map(|_| dist::categorical(rng, &eta)).collect();
        Ok(MixtureState {
            sigma2: priors.sigma2.sample(rng),
            eta,
            sigma2_h,
            rho,
        })
    }

    pub fn components(&self) -> usize {
        self.eta.len()
    }

    /// `Pr(rho_t = h | ...)` for one increment.
    pub fn allocation_probs(&self, dz: f64) -> Vec<f64> {
        let logs: Vec<f64> = self
            .eta
            .iter()
            .zip(&self.sigma2_h)
            .map(|(eta, s2h)| eta.ln() + dist::normal_log_pdf(dz, 0.0, self.sigma2 * s2h))
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    /// Allocation counts `R_h`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.components()];
        for &h in &self.rho {
            counts[h] += 1;
        }
        counts
    }

    /// rho, eta, sigma2_h, sigma2 in that order.
    pub fn update<R: Rng + ?Sized>(&mut self, increments: &[f64], priors: &Priors, rng: &mut R) {
        mixture_update(self, increments, priors, rng);
    }
}

pub fn mixture_update<R: Rng + ?Sized>(
    state: &mut MixtureState,
    increments: &[f64],
    priors: &Priors,
    rng: &mut R,
) {
    let components = state.components();
    for (t, &dz) in increments.iter().enumerate() {
        let probs = state.allocation_probs(dz);
        state.rho[t] = dist::categorical(rng, &probs);
    }

    let counts = state.counts();
    let alpha: Vec<f64> = counts
        .iter()
        .map(|&r| priors.eta_concentration + r as f64)
        .collect();
    state.eta = dist::dirichlet(rng, &alpha);

    let mut ss = vec![0.0; components];
    for (&h, &dz) in state.rho.iter().zip(increments) {
        ss[h] += dz * dz;
    }
    for h in 0..components {
        let shape = priors.sigma2_h.shape + 0.5 * counts[h] as f64;
        let rate = priors.sigma2_h.rate + ss[h] / (2.0 * state.sigma2);
        state.sigma2_h[h] = dist::inv_gamma(rng, shape, rate);
    }

    let weighted: f64 = state
        .rho
        .iter()
        .zip(increments)
        .map(|(&h, dz)| dz * dz / state.sigma2_h[h])
        .sum();
    let (shape, rate) = sigma2_posterior(&priors.sigma2, increments.len(), weighted);
    state.sigma2 = dist::inv_gamma(rng, shape, rate);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ChainRng;
    use rand::SeedableRng;

    fn state(sigma2_h: Vec<f64>, eta: Vec<f64>) -> MixtureState {
        MixtureState {
            sigma2: 1.0,
            eta,
            sigma2_h,
            rho: vec![0; 4],
        }
    }

    #[test]
    fn allocation_examples() {
        let s = state(vec![1.0, 4.0], vec![0.5, 0.5]);
        let p = s.allocation_probs(0.0);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);

        let s = state(vec![2.0, 2.0], vec![0.3, 0.7]);
        for dz in [-3.0, 0.0, 0.4, 10.0] {
            let p = s.allocation_probs(dz);
            assert!((p[0] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_draws_follow_dirichlet_mean() {
        let priors = Priors::default();
        let mut s = state(vec![1.0, 1.0], vec![0.5, 0.5]);
        s.rho = [vec![0; 10], vec![1; 5]].concat();
        let dz = vec![0.1; 15];
        let mut rng = ChainRng::seed_from_u64(3);
        // With equal component scales allocations follow eta; sample eta given
        // fixed allocations directly through the Dirichlet step.
        let counts = s.counts();
        assert_eq!(counts, vec![10, 5]);
        let n = 50_000;
        let mut mean = 0.0;
        for _ in 0..n {
            let alpha: Vec<f64> = counts.iter().map(|&r| priors.eta_concentration + r as f64).collect();
            mean += dist::dirichlet(&mut rng, &alpha)[0];
        }
        mean /= n as f64;
        assert!((mean - 11.0 / 17.0).abs() < 0.005, "{mean}");
        mixture_update(&mut s, &dz, &priors, &mut rng);
        assert!((s.eta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_component_draws_from_prior() {
        let priors = Priors::default();
        let mut rng = ChainRng::seed_from_u64(12);
        // Component 1 has tiny variance relative to the increments, so no
        // increment gets allocated there once eta strongly favours component 0.
        let mut s = state(vec![1.0, 1e-8], vec![1.0 - 1e-12, 1e-12]);
        let dz = vec![1.0; 4];
        mixture_update(&mut s, &dz, &priors, &mut rng);
        assert!(s.sigma2_h.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn rejects_single_component() {
        let mut rng = ChainRng::seed_from_u64(1);
        assert!(MixtureState::new(5, 1, &mut rng).is_err());
    }
}
