//! Statistical checks of the simulator against the analytic model.

use ewsn::model::{w_survival, ModelParams};
use ewsn::retrieval::{asymptotic_harvest, expected_time_closed_form, RetrievalQuery};
use ewsn::sim::{
    empirical_cdf_distance, simulate, steady_state_empirical, ArrivalMode, SimConfig, SimResult,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(n: usize, b: usize, lambda_e: f64, mu: f64) -> ModelParams {
    ModelParams::new(n, b, lambda_e, mu).unwrap()
}

fn ks_critical(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Inverse-transform draw from the single-sensor law by bisection on the
/// survival function.
fn draw_w(p: &ModelParams, u: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while w_survival(p, hi) > u {
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if w_survival(p, mid) > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `W_s` samples built straight from the analytic law: the s-th smallest of
/// N independent inverse-transform draws.
fn analytic_sample(p: &ModelParams, s: usize, size: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|_| {
            let mut draws: Vec<f64> =
                (0..p.n_sensors).map(|_| draw_w(p, rng.random::<f64>())).collect();
            draws.sort_by(f64::total_cmp);
            draws[s - 1]
        })
        .collect()
}

#[test]
fn ks_machinery_accepts_the_true_law() {
    let p = params(6, 2, 0.1, 0.4);
    let samples = analytic_sample(&p, 2, 4000, 11);
    let config = SimConfig::new(p, 2, samples.len(), 11).unwrap();
    let r = SimResult::from_samples(config, samples).unwrap();
    let q = RetrievalQuery::new(p, 2).unwrap();
    let ks = empirical_cdf_distance(&r, &q).unwrap();
    assert!(ks < ks_critical(4000), "ks={ks}");
    let wrong = RetrievalQuery::new(p, 3).unwrap();
    assert!(empirical_cdf_distance(&r, &wrong).unwrap() > ks_critical(4000));
}

#[test]
fn simulator_matches_law_and_rejects_wrong_s() {
    let p = params(6, 2, 0.1, 0.4);
    let r = simulate(&SimConfig::new(p, 2, 6000, 42).unwrap()).unwrap();
    let crit = ks_critical(6000);
    let right = empirical_cdf_distance(&r, &RetrievalQuery::new(p, 2).unwrap()).unwrap();
    let wrong = empirical_cdf_distance(&r, &RetrievalQuery::new(p, 3).unwrap()).unwrap();
    assert!(right < crit, "ks={right} crit={crit}");
    assert!(wrong > 3.0 * crit, "ks={wrong} crit={crit}");
    let exact = expected_time_closed_form(&RetrievalQuery::new(p, 2).unwrap()).unwrap();
    assert!(r.ci_contains(exact), "{:?} vs {exact}", r.ci_95());
}

#[test]
fn distance_requires_matching_network() {
    let p = params(6, 2, 0.1, 0.4);
    let r = simulate(&SimConfig::new(p, 2, 10, 1).unwrap()).unwrap();
    let other = RetrievalQuery::new(params(6, 3, 0.1, 0.4), 2).unwrap();
    assert!(empirical_cdf_distance(&r, &other).is_err());
}

#[test]
fn saturated_energy_mean() {
    // Harvesting far outpaces broadcasting, so batteries are almost never
    // empty and the client waits only on broadcast clocks.
    let p = params(5, 3, 5.0, 0.4);
    let r = simulate(&SimConfig::new(p, 2, 8000, 5).unwrap()).unwrap();
    let limit = asymptotic_harvest(5, 2, 0.4).unwrap();
    let exact = expected_time_closed_form(&RetrievalQuery::new(p, 2).unwrap()).unwrap();
    assert!((exact - limit).abs() / limit < 1e-6);
    assert!(r.ci_contains(exact), "{:?} vs {exact}", r.ci_95());
}

#[test]
fn occupancy_converges_to_stationary_law() {
    let single = SimConfig::new(params(1, 1, 0.2, 0.4), 1, 1, 3).unwrap();
    let occ = steady_state_empirical(&single, 2.0e5).unwrap();
    assert!(occ.tv_distance < 0.01, "tv={}", occ.tv_distance);
    assert!((occ.state.probs[0] - 2.0 / 3.0).abs() < 0.01);

    let uniform = SimConfig::new(params(10, 3, 0.04, 0.4), 2, 1, 3).unwrap();
    let occ = steady_state_empirical(&uniform, 2.0e6).unwrap();
    assert!(occ.tv_distance < 0.01, "tv={}", occ.tv_distance);

    // Near-equal rates mix slowly, hence the longer horizon.
    for (lambda_e, horizon) in [(0.2, 2.0e5), (0.03, 2.0e6)] {
        let c = SimConfig::new(params(10, 4, lambda_e, 0.4), 2, 1, 3).unwrap();
        let occ = steady_state_empirical(&c, horizon).unwrap();
        assert!(occ.tv_distance < 0.01, "λ={lambda_e} tv={}", occ.tv_distance);
    }
}

#[test]
fn occupancy_error_shrinks_with_horizon() {
    let p = params(1, 1, 0.2, 0.4);
    let mean_tv = |horizon: f64| {
        (0..32u64)
            .map(|seed| {
                let c = SimConfig::new(p, 1, 1, seed).unwrap();
                steady_state_empirical(&c, horizon).unwrap().tv_distance
            })
            .sum::<f64>()
            / 32.0
    };
    let short = mean_tv(2.0e3);
    let long = mean_tv(4.0e3);
    assert!(long <= short, "{long} > {short}");
}

#[test]
fn doubling_warmup_does_not_move_the_mean() {
    let p = params(10, 4, 0.03, 0.4);
    let base = SimConfig::new(p, 2, 400, 0).unwrap();
    let mut diffs = Vec::new();
    let mut pooled = Vec::new();
    for seed in 0..64 {
        let short = simulate(&SimConfig { seed, ..base }).unwrap();
        let long = simulate(&SimConfig { seed: seed + 1000, ..base }.with_warmup(2.0 * base.warmup_time).unwrap())
            .unwrap();
        diffs.push(long.mean - short.mean);
        pooled.extend(short.ws_samples);
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean diff {mean} sd {sd}");
    let exact = expected_time_closed_form(&RetrievalQuery::new(p, 2).unwrap()).unwrap();
    let r = SimResult::from_samples(base, pooled).unwrap();
    assert!(r.ci_contains(exact), "{:?} vs {exact}", r.ci_95());
}

#[test]
fn poisson_arrivals_see_time_averages() {
    let p = params(10, 4, 0.2, 0.4).with_arrival_rate(1.0).unwrap();
    let inject = simulate(&SimConfig::new(p, 2, 6000, 9).unwrap()).unwrap();
    let poisson = simulate(
        &SimConfig::new(p, 2, 6000, 10)
            .unwrap()
            .with_arrival_mode(ArrivalMode::PoissonArrivals)
            .unwrap(),
    )
    .unwrap();
    let (a_lo, a_hi) = inject.ci_95();
    let (b_lo, b_hi) = poisson.ci_95();
    assert!(a_lo <= b_hi && b_lo <= a_hi, "{:?} vs {:?}", inject.ci_95(), poisson.ci_95());
    let exact = expected_time_closed_form(&RetrievalQuery::new(p, 2).unwrap()).unwrap();
    assert!(poisson.ci_contains(exact));
}

#[test]
fn poisson_mode_needs_an_arrival_rate() {
    let c = SimConfig::new(params(4, 2, 0.2, 0.4), 2, 10, 1).unwrap();
    assert!(c.with_arrival_mode(ArrivalMode::PoissonArrivals).is_err());
}

#[test]
fn slower_harvest_means_slower_retrieval() {
    let fast = simulate(&SimConfig::new(params(10, 4, 0.2, 0.4), 2, 3000, 21).unwrap()).unwrap();
    let slow = simulate(&SimConfig::new(params(10, 4, 0.03, 0.4), 2, 3000, 22).unwrap()).unwrap();
    assert!(fast.ci_95().1 < slow.ci_95().0);
}

#[test]
fn runs_are_reproducible() {
    let c = SimConfig::new(params(8, 3, 0.1, 0.4), 3, 200, 77).unwrap();
    let a = simulate(&c).unwrap();
    let b = simulate(&c).unwrap();
    assert_eq!(a.ws_samples, b.ws_samples);
    let other = simulate(&SimConfig { seed: 78, ..c }).unwrap();
    assert_ne!(a.ws_samples, other.ws_samples);
    let prefix = simulate(&SimConfig { replications: 50, ..c }).unwrap();
    assert_eq!(prefix.ws_samples[..], a.ws_samples[..50]);
}

#[test]
fn single_sensor_mean_matches_lemma_mean() {
    let p = params(1, 1, 0.2, 0.4);
    let r = simulate(&SimConfig::new(p, 1, 20000, 8).unwrap()).unwrap();
    let nu0 = ewsn::model::steady_state(&p).nu0();
    let expected = 1.0 / 0.4 + nu0 / 0.2;
    assert!((expected - 35.0 / 6.0).abs() < 1e-12);
    assert!(r.ci_contains(expected), "{:?} vs {expected}", r.ci_95());
}
