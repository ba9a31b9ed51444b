//! Innovation models for the random-walk increments `z_t - z_{t-1}`.
//!
//! Every model is conditionally Gaussian: given its auxiliary variables the
//! increments are independent `N(0, 1 / k_t)`. [`InnovationState::precisions`]
//! exposes `k` to the latent sampler and [`InnovationState::update`] redraws
//! the model's own parameters given the current path.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::priors::Priors;
use crate::{Error, Result};

pub mod gaussian;
pub mod mixture;
pub mod student_t;
pub mod sv;

pub use gaussian::GaussianState;
pub use mixture::MixtureState;
pub use student_t::StudentTState;
pub use sv::SvState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InnovationModel {
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "student_t")]
    StudentT,
    #[serde(rename = "mixture")]
    Mixture,
    #[serde(rename = "sv")]
    StochVol,
}

impl InnovationModel {
    pub const ALL: [InnovationModel; 4] = [
        InnovationModel::Gaussian,
        InnovationModel::StudentT,
        InnovationModel::Mixture,
        InnovationModel::StochVol,
    ];

    /// Token used on the command line and in report files.
    pub fn as_str(self) -> &'static str {
        match self {
            InnovationModel::Gaussian => "gaussian",
            InnovationModel::StudentT => "student_t",
            InnovationModel::Mixture => "mixture",
            InnovationModel::StochVol => "sv",
        }
    }

    /// Human-readable label for tables.
    pub fn label(self) -> &'static str {
        match self {
            InnovationModel::Gaussian => "Gaussian",
            InnovationModel::StudentT => "Student's t",
            InnovationModel::Mixture => "Mixture",
            InnovationModel::StochVol => "Stoch. Vol.",
        }
    }
}

impl fmt::Display for InnovationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InnovationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(InnovationModel::Gaussian),
            "student_t" | "student-t" => Ok(InnovationModel::StudentT),
            "mixture" => Ok(InnovationModel::Mixture),
            "sv" => Ok(InnovationModel::StochVol),
            other => Err(Error::InvalidConfig(format!(
                "unknown model `{other}` (expected gaussian, student_t, mixture or sv)"
            ))),
        }
    }
}

/// Parameters and auxiliary variables of the active innovation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum InnovationState {
    Gaussian(GaussianState),
    StudentT(StudentTState),
    Mixture(MixtureState),
    StochVol(SvState),
}

impl InnovationState {
    /// Default starting values for `n_increments = T + 1` increments.
    pub fn init<R: Rng + ?Sized>(
        model: InnovationModel,
        n_increments: usize,
        components: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match model {
            InnovationModel::Gaussian => InnovationState::Gaussian(GaussianState::new(n_increments, 1.0)),
            InnovationModel::StudentT => InnovationState::StudentT(StudentTState::new(n_increments)),
            InnovationModel::Mixture => {
                InnovationState::Mixture(MixtureState::new(n_increments, components, rng)?)
            }
            InnovationModel::StochVol => InnovationState::StochVol(SvState::new(n_increments)),
        })
    }

    /// Joint draw of parameters and auxiliary variables from the prior.
    pub fn sample_prior<R: Rng + ?Sized>(
        model: InnovationModel,
        n_increments: usize,
        components: usize,
        priors: &Priors,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match model {
            InnovationModel::Gaussian => {
                InnovationState::Gaussian(GaussianState::sample_prior(n_increments, priors, rng))
            }
            InnovationModel::StudentT => {
                InnovationState::StudentT(StudentTState::sample_prior(n_increments, priors, rng))
            }
            InnovationModel::Mixture => InnovationState::Mixture(MixtureState::sample_prior(
                n_increments,
                components,
                priors,
                rng,
            )?),
            InnovationModel::StochVol => {
                InnovationState::StochVol(SvState::sample_prior(n_increments, priors, rng))
            }
        })
    }

    pub fn model(&self) -> InnovationModel {
        match self {
            InnovationState::Gaussian(_) => InnovationModel::Gaussian,
            InnovationState::StudentT(_) => InnovationModel::StudentT,
            InnovationState::Mixture(_) => InnovationModel::Mixture,
            InnovationState::StochVol(_) => InnovationModel::StochVol,
        }
    }

    /// Increment precisions `k_1..k_{T+1}` written into `out`.
    pub fn precisions_into(&self, out: &mut [f64]) -> Result<()> {
        match self {
            InnovationState::Gaussian(s) => out.fill(1.0 / s.sigma2),
            InnovationState::StudentT(s) => {
                for (k, w) in out.iter_mut().zip(&s.omega) {
                    *k = w / s.sigma2;
                }
            }
            InnovationState::Mixture(s) => {
                for (k, &h) in out.iter_mut().zip(&s.rho) {
                    *k = 1.0 / (s.sigma2 * s.sigma2_h[h]);
                }
            }
            InnovationState::StochVol(s) => {
                for (k, h) in out.iter_mut().zip(&s.h) {
                    *k = (-h).exp();
                }
            }
        }
        match out
            .iter()
            .enumerate()
            .find(|(_, k)| !(k.is_finite() && **k > 0.0))
        {
            Some((index, &value)) => Err(Error::DegeneratePrecision { index, value }),
            None => Ok(()),
        }
    }

    pub fn precisions(&self) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_increments()];
        self.precisions_into(&mut out)?;
        Ok(out)
    }

    pub fn n_increments(&self) -> usize {
        match self {
            InnovationState::Gaussian(s) => s.n_increments,
            InnovationState::StudentT(s) => s.omega.len(),
            InnovationState::Mixture(s) => s.rho.len(),
            InnovationState::StochVol(s) => s.h.len(),
        }
    }

    /// Redraw all model parameters given the increments of the current path.
    pub fn update<R: Rng + ?Sized>(&mut self, increments: &[f64], priors: &Priors, rng: &mut R) {
        match self {
            InnovationState::Gaussian(s) => s.update(increments, priors, rng),
            InnovationState::StudentT(s) => s.update(increments, priors, rng),
            InnovationState::Mixture(s) => s.update(increments, priors, rng),
            InnovationState::StochVol(s) => s.update(increments, priors, rng),
        }
    }

    /// Names of the scalar parameters reported in traces.
    pub fn scalar_names(&self) -> Vec<String> {
        match self {
            InnovationState::Gaussian(_) => vec!["sigma2".into()],
            InnovationState::StudentT(_) => vec!["sigma2".into(), "nu".into()],
            InnovationState::Mixture(s) => {
                let mut names = vec!["sigma2".to_string()];
                names.extend((1..=s.eta.len()).map(|h| format!("eta_{h}")));
                names.extend((1..=s.eta.len()).map(|h| format!("sigma2_h_{h}")));
                names
            }
            InnovationState::StochVol(_) => vec!["mu".into(), "phi".into(), "sigma_xi2".into()],
        }
    }

    /// Current values in the order of [`Self::scalar_names`].
    pub fn scalar_values(&self, out: &mut Vec<f64>) {
        out.clear();
        match self {
            InnovationState::Gaussian(s) => out.push(s.sigma2),
            InnovationState::StudentT(s) => out.extend([s.sigma2, s.nu]),
            InnovationState::Mixture(s) => {
                out.push(s.sigma2);
                out.extend(&s.eta);
                out.extend(&s.sigma2_h);
            }
            InnovationState::StochVol(s) => out.extend([s.mu, s.phi, s.sigma_xi2]),
        }
    }

    /// Log-variance path for SV, `None` otherwise.
    pub fn log_variances(&self) -> Option<&[f64]> {
        match self {
            InnovationState::StochVol(s) => Some(&s.h),
            _ => None,
        }
    }

    /// Acceptance rates of the Metropolis steps inside the hyperparameter
    /// block, by name.
    pub fn acceptance_rates(&self) -> Vec<(&'static str, f64)> {
        match self {
            InnovationState::StudentT(s) => s.nu_scale.acceptance_rate().map(|r| ("nu", r)).into_iter().collect(),
            InnovationState::StochVol(s) => s.acceptance_rates(),
            _ => Vec::new(),
        }
    }

    pub fn reset_counts(&mut self) {
        match self {
            InnovationState::StudentT(s) => s.nu_scale.reset_counts(),
            InnovationState::StochVol(s) => s.reset_counts(),
            _ => {}
        }
    }
}

/// `z_t - z_{t-1}` for `t = 1..z.len()`.
pub fn increments_into(z: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(z.windows(2).map(|w| w[1] - w[0]));
}
