//! Thin sampling helpers over `rand_distr` with the parametrizations used in
//! the model (Gamma by shape/rate, inverse-Gamma by shape/rate).

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal, Poisson, StandardNormal};

/// Above this intensity Poisson draws use a Normal approximation.
pub const POISSON_NORMAL_CUTOFF: f64 = 1e10;

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    mean + sd * std_normal(rng)
}

/// Gamma with shape `a` and rate `b` (mean `a / b`).
pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .unwrap_or_else(|_| panic!("gamma parameters shape={shape} rate={rate}"))
        .sample(rng)
}

/// Inverse-Gamma with shape `a` and rate (scale) `b` (mean `b / (a - 1)`).
pub fn inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    1.0 / gamma(rng, shape, rate)
}

pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    Beta::new(a, b)
        .unwrap_or_else(|_| panic!("beta parameters a={a} b={b}"))
        .sample(rng)
}

pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    let mut draws: Vec<f64> = alpha.iter().map(|&a| gamma(rng, a, 1.0)).collect();
    let total: f64 = draws.iter().sum();
    draws.iter_mut().for_each(|d| *d /= total);
    draws
}

pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Index drawn with probability proportional to `weights`.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

pub fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < POISSON_NORMAL_CUTOFF {
        let draw: f64 = Poisson::new(lambda).expect("finite positive rate").sample(rng);
        return draw as u64;
    }
    let approx = Normal::new(lambda, lambda.sqrt())
        .map(|n| n.sample(rng))
        .unwrap_or(lambda);
    approx.round().clamp(0.0, u64::MAX as f64) as u64
}

pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (std::f64::consts::TAU * var).ln() - 0.5 * d * d / var
}
