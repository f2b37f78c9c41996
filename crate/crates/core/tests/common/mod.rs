//! Independent reference computations shared by the integration and
//! acceptance tests. Nothing here calls the filtering or regression code
//! under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rebound_core::kalman::StateSpaceModel;

/// Log density of the stacked observations computed from the joint
/// Gaussian distribution of all states and observations at once.
pub fn dense_loglik(model: &StateSpaceModel, obs: &[DVector<f64>]) -> f64 {
    let t_len = obs.len();
    // Marginal means and the full state covariance, block by block.
    let mut means = vec![model.init_mean.clone()];
    let mut var = vec![model.init_cov.clone()];
    for t in 1..t_len {
        means.push(&model.transition * &means[t - 1]);
        var.push(&model.transition * &var[t - 1] * model.transition.transpose() + &model.state_cov);
    }
    // Cov(x_s, x_t) = F^(s-t) Var(x_t) for s >= t.
    let state_cov = |s: usize, t: usize| -> DMatrix<f64> {
        let (lo, hi) = (s.min(t), s.max(t));
        let mut m = var[lo].clone();
        for _ in lo..hi {
            m = &model.transition * m;
        }
        if s >= t { m } else { m.transpose() }
    };
    let dims: Vec<usize> = obs.iter().map(|y| y.len()).collect();
    let offs: Vec<usize> = dims.iter().scan(0, |a, d| { let o = *a; *a += d; Some(o) }).collect();
    let total: usize = dims.iter().sum();
    let mut mu = DVector::zeros(total);
    let mut cov = DMatrix::zeros(total, total);
    for s in 0..t_len {
        mu.rows_mut(offs[s], dims[s]).copy_from(&(&model.design[s] * &means[s]));
        for t in 0..t_len {
            let mut block = &model.design[s] * state_cov(s, t) * model.design[t].transpose();
            if s == t {
                block += &model.obs_cov[s];
            }
            cov.view_mut((offs[s], offs[t]), (dims[s], dims[t])).copy_from(&block);
        }
    }
    let y = DVector::from_iterator(total, obs.iter().flat_map(|v| v.iter().copied()));
    let r = y - mu;
    let det = cov.determinant();
    let quad = (r.transpose() * cov.try_inverse().expect("invertible") * &r)[(0, 0)];
    -0.5 * (total as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad)
}

pub fn random_spd<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.2
}

/// A small random state-space model with its observations.
pub fn random_instance<R: Rng>(rng: &mut R) -> (StateSpaceModel, Vec<DVector<f64>>) {
    let t_len = rng.random_range(1..=8usize);
    let n = rng.random_range(1..=3usize);
    let m = rng.random_range(1..=2usize);
    let model = StateSpaceModel {
        design: (0..t_len).map(|_| DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.5..1.5))).collect(),
        obs_cov: (0..t_len).map(|_| random_spd(m, rng)).collect(),
        transition: DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.6..0.6)),
        state_cov: random_spd(n, rng),
        init_mean: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
        init_cov: random_spd(n, rng),
    };
    let obs = (0..t_len).map(|_| DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0))).collect();
    (model, obs)
}

/// Hamilton cycle by SVD least squares on the raw regressors.
pub fn hamilton_oracle(s: &[f64], h: usize, p: usize) -> Vec<f64> {
    let first = h + p - 1;
    let rows = s.len() - first;
    let x = DMatrix::from_fn(rows, p + 1, |r, c| {
        let t = first + r;
        if c == 0 { 1.0 } else { s[t - h - (c - 1)] }
    });
    let y = DVector::from_fn(rows, |r, _| s[first + r]);
    let b = x.clone().svd(true, true).solve(&y, 1e-13).expect("svd solve");
    (y - x * b).iter().copied().collect()
}

/// `J Cʰ J'` applied to the impact column, from an explicit companion matrix.
pub fn companion_irf(lags: &[DMatrix<f64>], impact_column: &DVector<f64>, horizon: usize) -> DMatrix<f64> {
    let k = impact_column.len();
    let p = lags.len();
    let mut c = DMatrix::zeros(k * p, k * p);
    for (i, a) in lags.iter().enumerate() {
        c.view_mut((0, i * k), (k, k)).copy_from(a);
    }
    for i in 1..p {
        c.view_mut((i * k, (i - 1) * k), (k, k)).fill_with_identity();
    }
    let mut state = DVector::zeros(k * p);
    state.rows_mut(0, k).copy_from(impact_column);
    let mut out = DMatrix::zeros(k, horizon + 1);
    for h in 0..=horizon {
        out.set_column(h, &state.rows(0, k));
        state = &c * state;
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Brown–Forsythe form of Levene's test statistic across equal-size groups.
pub fn levene(groups: &[Vec<f64>]) -> f64 {
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let mut s = g.clone();
            s.sort_by(f64::total_cmp);
            let med = if s.len() % 2 == 1 { s[s.len() / 2] } else { 0.5 * (s[s.len() / 2 - 1] + s[s.len() / 2]) };
            g.iter().map(|x| (x - med).abs()).collect()
        })
        .collect();
    let k = z.len() as f64;
    let n: f64 = z.iter().map(|g| g.len() as f64).sum();
    let grand = z.iter().flatten().sum::<f64>() / n;
    let between: f64 = z.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let within: f64 = z.iter().map(|g| { let m = mean(g); g.iter().map(|x| (x - m).powi(2)).sum::<f64>() }).sum();
    (n - k) / (k - 1.0) * between / within
}
