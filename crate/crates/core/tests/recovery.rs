//! Posterior recovery and sampler health on synthetic data.

use dzip::diagnostics::sorted_quantile;
use dzip::simulate::{simulate, GeneratorConfig, TrueInnovation};
use dzip::{run_chain, InnovationModel, McmcConfig};

fn interval(trace: &[f64]) -> (f64, f64) {
    let mut sorted = trace.to_vec();
    sorted.sort_by(f64::total_cmp);
    (sorted_quantile(&sorted, 0.025), sorted_quantile(&sorted, 0.975))
}

#[test]
fn gaussian_parameters_are_recovered() {
    let sim = simulate(&GeneratorConfig {
        n_obs: 200,
        z0: 50f64.ln(),
        pi: 0.95,
        innovation: TrueInnovation::Gaussian { sigma2: 0.1 },
        seed: 21,
    })
    .unwrap();
    let config = McmcConfig {
        n_burn: 2_000,
        n_draws: 10_000,
        seed: 22,
        model: InnovationModel::Gaussian,
        ..McmcConfig::default()
    };
    let store = run_chain(&sim.series, &config).unwrap();

    let (lo, hi) = interval(store.trace("sigma2").unwrap());
    assert!(lo < 0.1 && 0.1 < hi, "sigma2 interval ({lo}, {hi})");
    let (lo, hi) = interval(store.trace("pi").unwrap());
    assert!(lo < 0.95 && 0.95 < hi, "pi interval ({lo}, {hi})");

    // Fitted log-intensity tracks the truth at most observed sites.
    let n_sites = sim.truth.z.len();
    let inside = (1..n_sites)
        .filter(|&t| {
            let z: Vec<f64> = store.z_paths.iter().map(|p| p[t]).collect();
            let (lo, hi) = interval(&z);
            lo <= sim.truth.z[t] && sim.truth.z[t] <= hi
        })
        .count();
    assert!(inside as f64 / (n_sites - 1) as f64 > 0.85, "{inside} of {}", n_sites - 1);
}

#[test]
fn structural_zeros_are_classified() {
    let sim = simulate(&GeneratorConfig {
        n_obs: 150,
        z0: 200f64.ln(),
        pi: 0.8,
        innovation: TrueInnovation::Gaussian { sigma2: 0.02 },
        seed: 31,
    })
    .unwrap();
    let config = McmcConfig {
        n_burn: 1_000,
        n_draws: 5_000,
        seed: 32,
        model: InnovationModel::Gaussian,
        ..McmcConfig::default()
    };
    let store = run_chain(&sim.series, &config).unwrap();
    for (t, (&y, &s)) in sim.series.counts().iter().zip(&sim.truth.s).enumerate() {
        if y == 0 {
            // Zeros at an intensity near 200 cannot be Poisson draws.
            assert!(!s);
            assert!(store.active_probability[t] < 0.01, "t = {t}: {}", store.active_probability[t]);
        } else {
            assert_eq!(store.active_probability[t], 1.0);
        }
    }
}

#[test]
fn latent_acceptance_settles_near_target() {
    for model in InnovationModel::ALL {
        let sim = simulate(&GeneratorConfig {
            n_obs: 150,
            z0: 30f64.ln(),
            pi: 0.9,
            innovation: TrueInnovation::default_for(model),
            seed: 41,
        })
        .unwrap();
        let config = McmcConfig {
            n_burn: 2_000,
            n_draws: 4_000,
            seed: 42,
            model,
            store_paths: false,
            ..McmcConfig::default()
        };
        let store = run_chain(&sim.series, &config).unwrap();
        let rate = store.acceptance.latent.unwrap();
        assert!((0.15..=0.40).contains(&rate), "{model}: {rate}");
        for (name, r) in &store.acceptance.hyperparameters {
            assert!(*r > 0.05, "{model} {name}: {r}");
        }
    }
}

#[test]
fn sv_tracks_a_volatility_burst() {
    // Quiet, then a burst of large increments, then quiet again.
    let mut z = vec![4.0f64];
    for t in 0..180 {
        let sd: f64 = if (60..120).contains(&t) { 0.6 } else { 0.05 };
        let step = if t % 2 == 0 { sd } else { -sd };
        z.push(z.last().unwrap() + step);
    }
    let counts: Vec<u64> = z[1..].iter().map(|v| v.exp().round() as u64).collect();
    let series = dzip::CountSeries::synthetic(counts).unwrap();
    let config = McmcConfig {
        n_burn: 2_000,
        n_draws: 6_000,
        seed: 51,
        model: InnovationModel::StochVol,
        ..McmcConfig::default()
    };
    let store = run_chain(&series, &config).unwrap();
    let mean_h = |range: std::ops::Range<usize>| {
        let n = (store.h_paths.len() * range.len()) as f64;
        store.h_paths.iter().map(|p| p[range.clone()].iter().sum::<f64>()).sum::<f64>() / n
    };
    let (quiet, burst) = (mean_h(10..50), mean_h(70..110));
    assert!(burst > quiet + 2.0, "quiet {quiet}, burst {burst}");
}
