mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rebound_core::kalman::{carter_kohn_draw, kalman_loglik, kalman_smoother, StateSpaceModel};
use rebound_core::series::{ccf, hamilton_filter, Period, TimeSeries};
use rebound_core::synthetic::analytic_local_level;
use rebound_core::var::{irf_constant, cholesky_impact, ShockSpec, VarSpec};

fn monthly(values: Vec<f64>) -> TimeSeries {
    TimeSeries::new("s", "", Period::monthly(1970, 1).unwrap(), values).unwrap()
}

#[test]
fn loglik_matches_dense_gaussian() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..200 {
        let (model, obs) = common::random_instance(&mut rng);
        let got = kalman_loglik(&model, &obs).unwrap();
        let want = common::dense_loglik(&model, &obs);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn smoother_matches_dense_local_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let q = rng.random_range(0.01..2.0);
        let r = rng.random_range(0.01..2.0);
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let oracle = analytic_local_level(q, r, &y, 0.2, 5.0).unwrap();
        let obs: Vec<_> = y.iter().map(|v| DVector::from_element(1, *v)).collect();
        let (means, _) = kalman_smoother(&oracle.model, &obs).unwrap();
        for (a, b) in oracle.smoothed_means.iter().zip(&means) {
            assert!((a - b[0]).abs() < 1e-8);
        }
    }
}

#[test]
fn sampled_paths_average_to_smoothed_means() {
    let y = [0.5, 1.4, 0.9, 2.2, 2.0, 3.1, 2.7, 3.9];
    let oracle = analytic_local_level(0.3, 0.8, &y, 0.0, 4.0).unwrap();
    let (_, covs) = kalman_smoother(
        &oracle.model,
        &y.iter().map(|v| DVector::from_element(1, *v)).collect::<Vec<_>>(),
    )
    .unwrap();
    let obs: Vec<_> = y.iter().map(|v| DVector::from_element(1, *v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 50_000;
    let mut sum = vec![0.0; y.len()];
    let mut sumsq = vec![0.0; y.len()];
    for _ in 0..n {
        let path = carter_kohn_draw(&oracle.model, &obs, &mut rng).unwrap();
        for (t, x) in path.iter().enumerate() {
            sum[t] += x[0];
            sumsq[t] += x[0] * x[0];
        }
    }
    for t in 0..y.len() {
        let m = sum[t] / n as f64;
        let v = sumsq[t] / n as f64 - m * m;
        let se = (covs[t][(0, 0)] / n as f64).sqrt();
        assert!((m - oracle.smoothed_means[t]).abs() < 4.5 * se, "mean at {t}");
        assert!((v / covs[t][(0, 0)] - 1.0).abs() < 0.04, "variance at {t}");
    }
}

#[test]
fn hamilton_cycle_matches_svd_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    for case in 0..20 {
        let mut level = 4.0;
        let values: Vec<f64> = (0..600)
            .map(|_| {
                level += 0.002 + 0.01 * rng.random_range(-1.0..1.0);
                level
            })
            .collect();
        let (h, p) = if case % 2 == 0 { (24, 12) } else { (8, 4) };
        let cycle = hamilton_filter(&monthly(values.clone()), h, p).unwrap();
        let oracle = common::hamilton_oracle(&values, h, p);
        assert_eq!(cycle.len(), oracle.len());
        assert_eq!(cycle.start(), Period::monthly(1970, 1).unwrap().offset((h + p - 1) as i64));
        for (a, b) in cycle.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "case {case}: {a} vs {b}");
        }
    }
}

#[test]
fn hamilton_cycle_of_a_line_is_zero() {
    let line: Vec<f64> = (0..200).map(|t| 3.0 - 0.25 * t as f64).collect();
    let cycle = hamilton_filter(&monthly(line), 8, 1).unwrap();
    assert!(cycle.values().iter().all(|c| c.abs() < 1e-10));
}

#[test]
fn ccf_peaks_where_the_leader_leads() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let base: Vec<f64> = (0..403).map(|_| rng.random_range(-1.0..1.0)).collect();
    // y_t = x_{t-3}: x leads y by three periods.
    let x = monthly(base[3..].to_vec());
    let y = monthly(base[..400].to_vec());
    let c = ccf(&x, &y, 12).unwrap();
    let best = c
        .coefficients
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert_eq!(best.0, 3);
    assert!((best.1 - 1.0).abs() < 0.02);
    let c = ccf(&y, &x, 12).unwrap();
    let best = c.coefficients.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(best.0, -3);
    assert!((c.band - 2.0 / 20.0).abs() < 1e-15);
}

#[test]
fn ccf_of_independent_noise_mostly_inside_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut inside = 0;
    let mut total = 0;
    for _ in 0..200 {
        let x = monthly((0..300).map(|_| rng.random_range(-1.0..1.0)).collect());
        let y = monthly((0..300).map(|_| rng.random_range(-1.0..1.0)).collect());
        let c = ccf(&x, &y, 10).unwrap();
        for (_, v) in &c.coefficients {
            total += 1;
            if v.abs() <= c.band {
                inside += 1;
            }
        }
    }
    let share = inside as f64 / total as f64;
    assert!((0.93..0.975).contains(&share), "{share}");
}

#[test]
fn irf_matches_companion_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let k = rng.random_range(1..=3usize);
        let p = rng.random_range(1..=3usize);
        let lags: Vec<_> = (0..p)
            .map(|_| DMatrix::from_fn(k, k, |_, _| rng.random_range(-0.4..0.4)))
            .collect();
        let cov = common::random_spd(k, &mut rng);
        let impact = cholesky_impact(&cov).unwrap();
        let j = rng.random_range(0..k);
        let shock = ShockSpec::negative(j);
        let got = irf_constant(&lags, &impact, 24, shock).unwrap();
        let col = impact.matrix().column(j) * -1.0;
        let want = common::companion_irf(&lags, &col, 24);
        assert!((got - want).amax() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loglik_oracle_property(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (model, obs) = common::random_instance(&mut rng);
        let got = kalman_loglik(&model, &obs).unwrap();
        let want = common::dense_loglik(&model, &obs);
        prop_assert!((got - want).abs() < 1e-8 * want.abs().max(1.0));
    }

    #[test]
    fn pack_unpack_round_trip(k in 1usize..4, p in 1usize..4, intercept in any::<bool>(), seed in any::<u64>()) {
        let spec = VarSpec::new(k, p, intercept).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta: Vec<f64> = (0..spec.n_coefficients()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let packed = spec.pack(&spec.unpack(&beta));
        prop_assert_eq!(packed.as_slice(), beta.as_slice());
    }

    #[test]
    fn local_level_static_limit(y in proptest::collection::vec(-5.0f64..5.0, 1..10), r in 0.1f64..3.0) {
        let o = analytic_local_level(0.0, r, &y, 1.0, 2.0).unwrap();
        let want = (1.0 / 2.0 + y.iter().sum::<f64>() / r) / (1.0 / 2.0 + y.len() as f64 / r);
        for m in &o.smoothed_means {
            prop_assert!((m - want).abs() < 1e-9);
        }
    }
}

#[test]
fn scalar_local_level_model_is_random_walk() {
    let m = StateSpaceModel::local_level(0.1, 1.0, 0.0, 1.0, 3);
    assert_eq!(m.transition, DMatrix::identity(1, 1));
    assert_eq!(m.nobs(), 3);
}
