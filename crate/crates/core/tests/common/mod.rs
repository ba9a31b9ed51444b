#![allow(dead_code)]

use dzip::dist;
use dzip::innovations::InnovationState;
use dzip::latent::LatentState;
use dzip::{InnovationModel, Priors, Z0Prior};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// One draw from the joint prior: latent state, innovation state and data.
pub struct JointDraw {
    pub latent: LatentState,
    pub innovation: InnovationState,
    pub y: Vec<u64>,
}

/// Forward simulation of the full model for `n_obs` observations, written
/// independently of the sampler's conditionals.
pub fn sample_joint<R: Rng>(model: InnovationModel, n_obs: usize, priors: &Priors, rng: &mut R) -> JointDraw {
    let (m0, v0) = match priors.z0 {
        Z0Prior::Normal { mean, var } => (mean, var),
        other => panic!("joint simulation needs a fixed proper z0 prior, got {other:?}"),
    };
    let innovation = InnovationState::sample_prior(model, n_obs + 1, 2, priors, rng).unwrap();
    let k = innovation.precisions().unwrap();
    let mut z = Vec::with_capacity(n_obs + 2);
    z.push(m0 + v0.sqrt() * dist::std_normal(rng));
    for kt in &k {
        let prev = *z.last().unwrap();
        z.push(prev + dist::std_normal(rng) / kt.sqrt());
    }
    let pi = priors.pi.sample(rng).clamp(1e-12, 1.0 - 1e-12);
    let s: Vec<bool> = (0..n_obs).map(|_| rng.random::<f64>() < pi).collect();
    let y = redraw_counts(&z, &s, rng);
    let mut latent = LatentState::new(&y, pi);
    latent.z = z;
    latent.s = s;
    JointDraw { latent, innovation, y }
}

/// `y_t | z_t, s_t` for `t = 1..=T`.
pub fn redraw_counts<R: Rng>(z: &[f64], s: &[bool], rng: &mut R) -> Vec<u64> {
    s.iter()
        .enumerate()
        .map(|(i, &open)| if open { dist::poisson(rng, z[i + 1].exp()) } else { 0 })
        .collect()
}

/// `sigma2` for the scale models, `exp(mu)` for SV.
pub fn scale_parameter(innovation: &InnovationState) -> f64 {
    match innovation {
        InnovationState::Gaussian(s) => s.sigma2,
        InnovationState::StudentT(s) => s.sigma2,
        InnovationState::Mixture(s) => s.sigma2,
        InnovationState::StochVol(s) => s.mu.exp(),
    }
}

/// Asymptotic Kolmogorov tail `P(K > x)`.
pub fn kolmogorov_tail(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut total = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * x * x).exp();
        total += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    total.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = (n as f64 * m as f64 / (n + m) as f64).sqrt();
    (d, kolmogorov_tail((en + 0.12 + 0.11 / en) * d))
}

/// Pearson chi-square uniformity test over equally likely bins.
pub fn chi_square_uniform(counts: &[usize]) -> (f64, f64) {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let df = (counts.len() - 1) as f64;
    (stat, 1.0 - ChiSquared::new(df).unwrap().cdf(stat))
}

pub fn mean_and_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
