//! Prior distributions for all model parameters.
//!
//! Defaults are weakly informative.
//! [`Priors::calibration`] gives a tighter proper set under which prior
//! predictive simulation stays numerically tame; the correctness suites
//! (Geweke, SBC) use it.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dist;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        dist::beta(rng, self.a, self.b)
    }

    /// Log density up to a constant.
    pub fn log_kernel(&self, x: f64) -> f64 {
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (1.0 - x).ln()
    }
}

/// Inverse-Gamma with shape and rate: density proportional to
/// `x^(-shape-1) exp(-rate / x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl InvGammaPrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        dist::inv_gamma(rng, self.shape, self.rate)
    }

    pub fn mean(&self) -> f64 {
        self.rate / (self.shape - 1.0)
    }
}

/// Gamma with shape and rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        dist::gamma(rng, self.shape, self.rate)
    }

    pub fn log_kernel(&self, x: f64) -> f64 {
        (self.shape - 1.0) * x.ln() - self.rate * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub var: f64,
}

impl NormalPrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        dist::normal(rng, self.mean, self.var.sqrt())
    }
}

/// `nu - shift ~ Exponential(rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedExpPrior {
    pub shift: f64,
    pub rate: f64,
}

impl ShiftedExpPrior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.shift + dist::gamma(rng, 1.0, self.rate)
    }

    /// Log density; `-inf` outside the support.
    pub fn log_density(&self, nu: f64) -> f64 {
        if nu <= self.shift {
            f64::NEG_INFINITY
        } else {
            self.rate.ln() - self.rate * (nu - self.shift)
        }
    }
}

/// Prior on the initial log-intensity `z_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Z0Prior {
    /// `p(z_0) ∝ 1`. The posterior is improper when no observation is on the
    /// sampling path.
    Flat,
    /// `N(log(1 + mean positive count), 1e4)`, centred from the data.
    WeakProper,
    /// Fixed `N(mean, var)`.
    Normal { mean: f64, var: f64 },
}

impl Z0Prior {
    pub const WEAK_VARIANCE: f64 = 1e4;

    /// Resolve to `(mean, var)` for a given series, or `None` when flat.
    pub fn resolve(&self, mean_positive_count: f64) -> Option<(f64, f64)> {
        match *self {
            Z0Prior::Flat => None,
            Z0Prior::WeakProper => Some((mean_positive_count.ln_1p(), Self::WEAK_VARIANCE)),
            Z0Prior::Normal { mean, var } => Some((mean, var)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    /// Probability of the sampling path being active.
    pub pi: BetaPrior,
    /// Global increment scale (Gaussian, Student-t, mixture).
    pub sigma2: InvGammaPrior,
    /// Student-t degrees of freedom.
    pub nu: ShiftedExpPrior,
    /// Symmetric Dirichlet concentration for mixture weights.
    pub eta_concentration: f64,
    /// Mixture component scales.
    pub sigma2_h: InvGammaPrior,
    /// SV level.
    pub mu: NormalPrior,
    /// SV persistence, placed on `(phi + 1) / 2`.
    pub phi: BetaPrior,
    /// SV innovation variance.
    pub sigma_xi2: GammaPrior,
    pub z0: Z0Prior,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            pi: BetaPrior { a: 0.5, b: 0.5 },
            sigma2: InvGammaPrior { shape: 2.5, rate: 1.5 },
            nu: ShiftedExpPrior { shift: 3.0, rate: 1.0 / 6.0 },
            eta_concentration: 1.0,
            sigma2_h: InvGammaPrior { shape: 2.5, rate: 1.5 },
            mu: NormalPrior { mean: 0.0, var: 100.0 },
            phi: BetaPrior { a: 5.0, b: 1.5 },
            sigma_xi2: GammaPrior { shape: 0.5, rate: 0.5 },
            z0: Z0Prior::WeakProper,
        }
    }
}

impl Priors {
    /// Default priors with an improper flat prior on `z_0`.
    pub fn flat_z0() -> Self {
        Priors {
            z0: Z0Prior::Flat,
            ..Priors::default()
        }
    }

    /// Proper, light-tailed priors for simulation-based checks. Increments
    /// have scale around 0.3 on the log-intensity and intensities start near
    /// e, so sampling zeros and structural zeros both occur.
    pub fn calibration() -> Self {
        Priors {
            pi: BetaPrior { a: 0.5, b: 0.5 },
            sigma2: InvGammaPrior { shape: 10.0, rate: 0.9 },
            nu: ShiftedExpPrior { shift: 3.0, rate: 1.0 / 6.0 },
            eta_concentration: 1.0,
            sigma2_h: InvGammaPrior { shape: 5.0, rate: 4.0 },
            mu: NormalPrior { mean: -2.3, var: 0.25 },
            phi: BetaPrior { a: 5.0, b: 1.5 },
            sigma_xi2: GammaPrior { shape: 5.0, rate: 50.0 },
            z0: Z0Prior::Normal { mean: 1.0, var: 0.25 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pi.a", self.pi.a),
            ("pi.b", self.pi.b),
            ("sigma2.shape", self.sigma2.shape),
            ("sigma2.rate", self.sigma2.rate),
            ("nu.rate", self.nu.rate),
            ("eta_concentration", self.eta_concentration),
            ("sigma2_h.shape", self.sigma2_h.shape),
            ("sigma2_h.rate", self.sigma2_h.rate),
            ("mu.var", self.mu.var),
            ("phi.a", self.phi.a),
            ("phi.b", self.phi.b),
            ("sigma_xi2.shape", self.sigma_xi2.shape),
            ("sigma_xi2.rate", self.sigma_xi2.rate),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!("prior {name} must be positive, got {value}")));
            }
        }
        if !self.mu.mean.is_finite() || !self.nu.shift.is_finite() {
            return Err(Error::InvalidConfig("prior location must be finite".into()));
        }
        if let Z0Prior::Normal { mean, var } = self.z0 {
            if !mean.is_finite() || !(var > 0.0) {
                return Err(Error::InvalidConfig(format!("z0 prior N({mean}, {var}) is invalid")));
            }
        }
        Ok(())
    }
}

/// `log Gamma(x; shape, rate)` including the normalizing constant.
pub fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Priors::default().validate().unwrap();
        Priors::calibration().validate().unwrap();
        Priors::flat_z0().validate().unwrap();
    }

    #[test]
    fn z0_resolution() {
        assert_eq!(Z0Prior::Flat.resolve(10.0), None);
        let (m, v) = Z0Prior::WeakProper.resolve(9.0).unwrap();
        assert!((m - 10f64.ln()).abs() < 1e-15);
        assert_eq!(v, 1e4);
    }

    #[test]
    fn shifted_exp_support() {
        let p = ShiftedExpPrior { shift: 3.0, rate: 1.0 / 6.0 };
        assert_eq!(p.log_density(3.0), f64::NEG_INFINITY);
        assert_eq!(p.log_density(2.0), f64::NEG_INFINITY);
        assert!(p.log_density(3.5).is_finite());
    }
}
