//! Forward simulation of synthetic series with known latent truth.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::count_model::CountSeries;
use crate::dist;
use crate::innovations::sv::simulate_ar1;
use crate::innovations::InnovationModel;
use crate::{ChainRng, Error, Result};

/// Largest intensity for which Poisson draws stay exactly representable.
pub const MAX_INTENSITY: f64 = 9.0e15;

/// True parameters of the increment distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrueInnovation {
    Gaussian { sigma2: f64 },
    StudentT { sigma2: f64, nu: f64 },
    Mixture { sigma2: f64, eta: Vec<f64>, sigma2_h: Vec<f64> },
    StochVol { mu: f64, phi: f64, sigma_xi2: f64 },
}

impl TrueInnovation {
    pub fn model(&self) -> InnovationModel {
        match self {
            TrueInnovation::Gaussian { .. } => InnovationModel::Gaussian,
            TrueInnovation::StudentT { .. } => InnovationModel::StudentT,
            TrueInnovation::Mixture { .. } => InnovationModel::Mixture,
            TrueInnovation::StochVol { .. } => InnovationModel::StochVol,
        }
    }

    /// Representative parameter values for each model.
    pub fn default_for(model: InnovationModel) -> Self {
        match model {
            InnovationModel::Gaussian => TrueInnovation::Gaussian { sigma2: 0.1 },
            InnovationModel::StudentT => TrueInnovation::StudentT { sigma2: 0.05, nu: 5.0 },
            InnovationModel::Mixture => TrueInnovation::Mixture {
                sigma2: 0.05,
                eta: vec![0.8, 0.2],
                sigma2_h: vec![0.5, 5.0],
            },
            InnovationModel::StochVol => TrueInnovation::StochVol {
                mu: -3.0,
                phi: 0.95,
                sigma_xi2: 0.05,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            TrueInnovation::Gaussian { sigma2 } if !(*sigma2 >= 0.0 && sigma2.is_finite()) => {
                bad(format!("sigma2 must be non-negative, got {sigma2}"))
            }
            TrueInnovation::StudentT { sigma2, nu } if !(*sigma2 >= 0.0 && sigma2.is_finite() && *nu > 0.0) => {
                bad(format!("invalid Student-t parameters sigma2 = {sigma2}, nu = {nu}"))
            }
            TrueInnovation::Mixture { sigma2, eta, sigma2_h } => {
                if !(*sigma2 >= 0.0 && sigma2.is_finite()) {
                    return bad(format!("sigma2 must be non-negative, got {sigma2}"));
                }
                if eta.is_empty() || eta.len() != sigma2_h.len() {
                    return bad("eta and sigma2_h must be non-empty and of equal length".into());
                }
                if eta.iter().any(|&w| !(w >= 0.0)) || (eta.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("eta must be a probability vector".into());
                }
                if sigma2_h.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return bad("component scales must be positive".into());
                }
                Ok(())
            }
            TrueInnovation::StochVol { mu, phi, sigma_xi2 } => {
                if !(phi.abs() < 1.0) || !mu.is_finite() || !(*sigma_xi2 >= 0.0 && sigma_xi2.is_finite()) {
                    return bad(format!(
                        "invalid SV parameters mu = {mu}, phi = {phi}, sigma_xi2 = {sigma_xi2}"
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Draw `n` increments; also returns the log-variance path for SV.
    fn increments<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<f64>, Option<Vec<f64>>) {
        match self {
            TrueInnovation::Gaussian { sigma2 } => {
                let sd = sigma2.sqrt();
                ((0..n).map(|_| sd * dist::std_normal(rng)).collect(), None)
            }
            TrueInnovation::StudentT { sigma2, nu } => {
                let sd = sigma2.sqrt();
                let dz = (0..n)
                    .map(|_| {
                        let omega = dist::gamma(rng, 0.5 * nu, 0.5 * nu);
                        sd * dist::std_normal(rng) / omega.sqrt()
                    })
                    .collect();
                (dz, None)
            }
            TrueInnovation::Mixture { sigma2, eta, sigma2_h } => {
                let dz = (0..n)
                    .map(|_| {
                        let h = dist::categorical(rng, eta);
                        (sigma2 * sigma2_h[h]).sqrt() * dist::std_normal(rng)
                    })
                    .collect();
                (dz, None)
            }
            TrueInnovation::StochVol { mu, phi, sigma_xi2 } => {
                let h = simulate_ar1(n, *mu, *phi, *sigma_xi2, rng);
                let dz = h.iter().map(|v| (0.5 * v).exp() * dist::std_normal(rng)).collect();
                (dz, Some(h))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_obs: usize,
    /// Initial log-intensity `z_0`.
    pub z0: f64,
    pub pi: f64,
    pub innovation: TrueInnovation,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_obs < CountSeries::MIN_LEN {
            return Err(Error::SeriesTooShort {
                len: self.n_obs,
                required: CountSeries::MIN_LEN,
            });
        }
        if !self.z0.is_finite() {
            return Err(Error::InvalidLogIntensity(self.z0));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::InvalidProbability(self.pi));
        }
        self.innovation.validate()
    }
}

/// Latent values behind a simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedTruth {
    /// `z_0..z_T`.
    pub z: Vec<f64>,
    pub s: Vec<bool>,
    /// `h_1..h_T` for SV.
    pub h: Option<Vec<f64>>,
    pub config: GeneratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub series: CountSeries,
    pub truth: SimulatedTruth,
}

/// Log-intensity path `z_0..z_n` and, for SV, `h_1..h_n`.
pub fn simulate_latent<R: Rng + ?Sized>(
    n: usize,
    z0: f64,
    innovation: &TrueInnovation,
    rng: &mut R,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let (dz, h) = innovation.increments(n, rng);
    let mut z = Vec::with_capacity(n + 1);
    z.push(z0);
    for d in dz {
        z.push(z.last().expect("non-empty") + d);
    }
    (z, h)
}

/// Gate and count draws for `z_1..z_n` (the first element of `z` is `z_0`).
pub fn draw_counts<R: Rng + ?Sized>(z: &[f64], pi: f64, rng: &mut R) -> Result<(Vec<u64>, Vec<bool>)> {
    let mut counts = Vec::with_capacity(z.len().saturating_sub(1));
    let mut gates = Vec::with_capacity(counts.capacity());
    for (t, &zt) in z.iter().enumerate().skip(1) {
        let lambda = zt.exp();
        if !(lambda <= MAX_INTENSITY) {
            return Err(Error::InvalidParameter(format!(
                "intensity exp({zt:.3}) at t = {t} exceeds the representable count range"
            )));
        }
        let gate = dist::bernoulli(rng, pi);
        gates.push(gate);
        counts.push(if gate { dist::poisson(rng, lambda) } else { 0 });
    }
    Ok((counts, gates))
}

pub fn simulate(config: &GeneratorConfig) -> Result<Simulation> {
    config.validate()?;
    let mut rng = ChainRng::seed_from_u64(config.seed);
    let (z, h) = simulate_latent(config.n_obs, config.z0, &config.innovation, &mut rng);
    let (counts, s) = draw_counts(&z, config.pi, &mut rng)?;
    Ok(Simulation {
        series: CountSeries::synthetic(counts)?,
        truth: SimulatedTruth {
            z,
            s,
            h,
            config: config.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(innovation: TrueInnovation, pi: f64, n_obs: usize) -> GeneratorConfig {
        GeneratorConfig {
            n_obs,
            z0: 10f64.ln(),
            pi,
            innovation,
            seed: 5,
        }
    }

    #[test]
    fn frozen_intensity_gives_iid_poisson() {
        let sim = simulate(&config(TrueInnovation::Gaussian { sigma2: 0.0 }, 1.0, 50_000)).unwrap();
        assert!(sim.truth.z.iter().all(|&z| z == 10f64.ln()));
        let y = sim.series.counts();
        let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
        let var = y.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / y.len() as f64;
        assert!((mean - 10.0).abs() < 0.1 && (var - 10.0).abs() < 0.4, "{mean} {var}");
    }

    #[test]
    fn closed_gate_gives_zeros() {
        let sim = simulate(&config(TrueInnovation::Gaussian { sigma2: 0.1 }, 0.0, 200)).unwrap();
        assert!(sim.series.counts().iter().all(|&y| y == 0));
    }

    #[test]
    fn sv_increment_variance_matches_lognormal_moment() {
        let (mu, phi, s2) = (-1.0, 0.95, 0.05);
        let mut rng = ChainRng::seed_from_u64(11);
        let (z, h) = simulate_latent(10_000, 0.0, &TrueInnovation::StochVol { mu, phi, sigma_xi2: s2 }, &mut rng);
        assert_eq!(h.unwrap().len(), 10_000);
        let dz: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = dz.iter().sum::<f64>() / dz.len() as f64;
        let var = dz.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dz.len() as f64;
        let expected = (mu + 0.5 * s2 / (1.0 - phi * phi)).exp();
        assert!((var / expected - 1.0).abs() < 0.1, "{var} vs {expected}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let sv = TrueInnovation::StochVol {
            mu: 0.0,
            phi: 1.0,
            sigma_xi2: 0.1,
        };
        assert!(simulate(&config(sv, 0.5, 20)).is_err());
        assert!(simulate(&config(TrueInnovation::Gaussian { sigma2: 0.1 }, 1.5, 20)).is_err());
        assert!(simulate(&config(TrueInnovation::Gaussian { sigma2: -1.0 }, 0.5, 20)).is_err());
        let mix = TrueInnovation::Mixture {
            sigma2: 1.0,
            eta: vec![0.5, 0.4],
            sigma2_h: vec![1.0, 2.0],
        };
        assert!(simulate(&config(mix, 0.5, 20)).is_err());
    }

    #[test]
    fn runaway_intensity_is_an_error() {
        let z = [0.0, 40.0];
        let mut rng = ChainRng::seed_from_u64(1);
        assert!(draw_counts(&z, 1.0, &mut rng).is_err());
    }

    #[test]
    fn every_default_generator_runs() {
        for model in InnovationModel::ALL {
            let truth = TrueInnovation::default_for(model);
            assert_eq!(truth.model(), model);
            let sim = simulate(&config(truth, 0.9, 300)).unwrap();
            assert_eq!(sim.series.len(), 300);
            assert_eq!(sim.truth.z.len(), 301);
        }
    }
}
