//! Homoskedastic Gaussian increments, `N(0, sigma2)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist;
use crate::priors::{InvGammaPrior, Priors};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub sigma2: f64,
    pub n_increments: usize,
}

impl GaussianState {
    pub fn new(n_increments: usize, sigma2: f64) -> Self {
        GaussianState { sigma2, n_increments }
    }

    pub fn sample_prior<R: Rng + ?Sized>(n_increments: usize, priors: &Priors, rng: &mut R) -> Self {
        GaussianState::new(n_increments, priors.sigma2.sample(rng))
    }

    pub fn update<R: Rng + ?Sized>(&mut self, increments: &[f64], priors: &Priors, rng: &mut R) {
        self.sigma2 = gaussian_update(increments, &priors.sigma2, rng);
    }
}

/// Shape and rate of the conjugate inverse-Gamma posterior of `sigma2`
/// given weighted squared increments.
pub fn sigma2_posterior(prior: &InvGammaPrior, n: usize, weighted_ss: f64) -> (f64, f64) {
    (prior.shape + 0.5 * n as f64, prior.rate + 0.5 * weighted_ss)
}

/// Draw `sigma2 | z`.
pub fn gaussian_update<R: Rng + ?Sized>(increments: &[f64], prior: &InvGammaPrior, rng: &mut R) -> f64 {
    let ss: f64 = increments.iter().map(|d| d * d).sum();
    let (shape, rate) = sigma2_posterior(prior, increments.len(), ss);
    dist::inv_gamma(rng, shape, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ChainRng;
    use rand::SeedableRng;

    const PRIOR: InvGammaPrior = InvGammaPrior { shape: 2.5, rate: 1.5 };

    #[test]
    fn posterior_parameters() {
        // T = 3: z = (0, 1, 0, 2, 2), increments (1, -1, 2, 0).
        let dz = [1.0, -1.0, 2.0, 0.0];
        let ss: f64 = dz.iter().map(|d| d * d).sum();
        assert_eq!(sigma2_posterior(&PRIOR, dz.len(), ss), (4.5, 4.5));
        assert_eq!(sigma2_posterior(&PRIOR, 10, 0.0), (7.5, 1.5));
    }

    #[test]
    fn draws_match_inverse_gamma_mean() {
        let dz = [1.0, -1.0, 2.0, 0.0];
        let mut rng = ChainRng::seed_from_u64(17);
        let n = 100_000;
        let mean = (0..n).map(|_| gaussian_update(&dz, &PRIOR, &mut rng)).sum::<f64>() / n as f64;
        // IG(4.5, 4.5) has mean 4.5 / 3.5.
        let expected = 4.5 / 3.5;
        assert!((mean - expected).abs() / expected < 0.005, "{mean}");
    }
}
