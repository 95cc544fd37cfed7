use pavlov_core::capacity::{empirical_snr, failure_report, CapacityTrialConfig};
use pavlov_core::rules::{
    bcm_psi, decay_closed_form, step_bcm, step_decay, step_delta, step_hebbian, step_oja,
};
use pavlov_core::sampling::{fill_unit_vector, sample_unit_sphere, stream_rng};
use pavlov_core::stacked::{error_propagation_experiment, PropagationConfig};
use pavlov_core::{AssociativeState, BcmThresholdState, HeadConfig, RowVector, Sequential};

#[test]
fn sphere_dot_products_have_variance_one_over_d() {
    let d = 64;
    let mut rng = stream_rng(17, &[1]);
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    let pairs = 100_000;
    let mut sum_sq = 0.0;
    for _ in 0..pairs {
        fill_unit_vector(&mut rng, &mut a);
        fill_unit_vector(&mut rng, &mut b);
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        sum_sq += dot * dot;
    }
    let var = sum_sq / pairs as f64;
    assert!((var * d as f64 - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn unit_sphere_samples_are_reproducible() {
    let a = sample_unit_sphere(8, 5, 99).unwrap();
    assert_eq!(a, sample_unit_sphere(8, 5, 99).unwrap());
    assert_ne!(a, sample_unit_sphere(8, 5, 100).unwrap());
    assert!(a.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
}

#[test]
fn noise_power_tracks_load_over_dimension() {
    for (d_k, n) in [(32, 5), (128, 33)] {
        let cfg = CapacityTrialConfig::new(d_k, d_k, n, 0.5, 20_000, 4).unwrap();
        let r = empirical_snr(&cfg, &Sequential).unwrap();
        let rel =
            (r.mean_noise_power - cfg.predicted_noise_power()).abs() / cfg.predicted_noise_power();
        assert!(rel < 0.05, "d_k={d_k} n={n}: {rel}");
        assert_eq!(r, empirical_snr(&cfg, &Sequential).unwrap());
    }
}

#[test]
fn failure_rates_respect_both_bounds() {
    let cfg = CapacityTrialConfig::new(32, 32, 9, 0.5, 20_000, 8).unwrap();
    let r = failure_report(&cfg, &Sequential).unwrap();
    assert!(r.single_failure_rate > 0.0);
    assert!(r.any_failure_rate >= r.single_failure_rate);
    assert!(r.markov_compliant() && r.union_compliant(), "{r:?}");
}

fn random_pairs(count: usize, dim: usize, seed: u64) -> (Vec<RowVector>, Vec<RowVector>) {
    let keys = sample_unit_sphere(dim, count, seed).unwrap();
    let values = sample_unit_sphere(dim, count, seed + 1).unwrap();
    (keys, values)
}

#[test]
fn decay_recurrence_matches_closed_form() {
    let (keys, values) = random_pairs(40, 6, 21);
    let cfg = HeadConfig {
        alpha: 0.3,
        ..HeadConfig::plain()
    };
    let mut st = AssociativeState::new(6, 6).unwrap();
    for (k, v) in keys.iter().zip(&values) {
        step_decay(&mut st, k, v, &cfg, 0.9).unwrap();
    }
    let closed = decay_closed_form(6, 6, &keys, &values, &cfg, 0.9).unwrap();
    assert!(st.matrix().max_abs_diff(closed.matrix()).unwrap() < 1e-12);
}

#[test]
fn delta_rule_with_unit_rate_overwrites() {
    let (keys, values) = random_pairs(6, 8, 31);
    let cfg = HeadConfig::plain();
    let mut st = AssociativeState::new(8, 8).unwrap();
    for (k, v) in keys.iter().zip(&values).take(5) {
        step_hebbian(&mut st, k, v, &cfg).unwrap();
    }
    step_delta(&mut st, &keys[0], &values[5], &cfg).unwrap();
    let got = keys[0].mul_matrix(st.matrix()).unwrap();
    assert!(got.max_abs_diff(&values[5]).unwrap() < 1e-12);
}

#[test]
fn oja_stays_bounded_where_hebbian_grows() {
    let (keys, values) = random_pairs(2000, 8, 41);
    let cfg = HeadConfig {
        alpha: 0.1,
        ..HeadConfig::plain()
    };
    let mut heb = AssociativeState::new(8, 8).unwrap();
    let mut oja = AssociativeState::new(8, 8).unwrap();
    for (k, v) in keys.iter().zip(&values) {
        step_hebbian(&mut heb, k, v, &cfg).unwrap();
        step_oja(&mut oja, k, v, &cfg).unwrap();
    }
    assert!(heb.matrix().frobenius_norm() > 5.0 * oja.matrix().frobenius_norm());
    assert!(oja.matrix().max_abs() < 1.0);
}

#[test]
fn bcm_threshold_tracks_mean_square_activity() {
    let d = 4;
    let mut st = AssociativeState::new(d, d).unwrap();
    let mut th = BcmThresholdState::zeros(d).unwrap();
    let cfg = HeadConfig {
        alpha: 0.01,
        ..HeadConfig::plain()
    };
    let k = RowVector::basis(d, 0).unwrap();
    let v = RowVector::from_slice(&[1.0, -2.0, 0.5, 0.0]).unwrap();
    for _ in 0..2000 {
        step_bcm(&mut st, &mut th, &k, &v, &cfg, 32.0).unwrap();
    }
    for (t, x) in th.theta().iter().zip(v.as_slice()) {
        assert!((t - x * x).abs() < 1e-9, "{t} vs {}", x * x);
    }
    assert!(bcm_psi(0.5, 1.0) < 0.0 && bcm_psi(2.0, 1.0) > 0.0);
}

#[test]
fn single_layer_propagation_is_the_head_rate() {
    let cfg = PropagationConfig {
        layers: 1,
        heads: 1,
        n: 8,
        d_k: 32,
        delta: 0.5,
        trials: 20_000,
        seed: 3,
    };
    let r = error_propagation_experiment(&cfg, &Sequential).unwrap();
    assert_eq!(r.empirical_rate, r.head_failure_rate);
    assert!(r.within_bound());
}

#[test]
fn propagation_grows_linearly_with_depth_at_small_rates() {
    let run = |layers| {
        let cfg = PropagationConfig {
            layers,
            heads: 1,
            n: 8,
            d_k: 32,
            delta: 0.5,
            trials: 40_000,
            seed: 5,
        };
        error_propagation_experiment(&cfg, &Sequential).unwrap()
    };
    let one = run(1);
    assert!(
        one.empirical_rate > 0.002 && one.empirical_rate < 0.05,
        "{}",
        one.empirical_rate
    );
    for layers in [2, 4] {
        let r = run(layers);
        let p = r.head_failure_rate;
        let expected = 1.0 - (1.0 - p).powi(layers as i32);
        assert!(
            (r.empirical_rate - expected).abs() < 4.0 * r.ci_halfwidth + 1e-3,
            "L={layers}"
        );
        let ratio = r.empirical_rate / one.empirical_rate;
        assert!(
            (ratio / layers as f64 - 1.0).abs() < 0.25,
            "L={layers}: ratio {ratio}"
        );
    }
}

#[test]
fn more_heads_suppress_layer_failures() {
    let run = |heads| {
        let cfg = PropagationConfig {
            layers: 2,
            heads,
            n: 8,
            d_k: 16,
            delta: 0.5,
            trials: 20_000,
            seed: 6,
        };
        error_propagation_experiment(&cfg, &Sequential).unwrap()
    };
    let (h1, h2) = (run(1), run(2));
    assert!(h2.empirical_rate < h1.empirical_rate);
    let p = h2.head_failure_rate;
    let per_layer = p * p;
    assert!(
        (h2.per_layer_rates[0] - per_layer).abs() < 0.02,
        "{:?} vs {per_layer}",
        h2.per_layer_rates
    );
}
