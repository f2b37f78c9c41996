//! The conditional draws that make up one Gibbs sweep.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::mixture::{self, component_mean, VARIANCES};
use super::{alpha_blocks, impact_from_factors, unit_lower, TvpPriors};
use crate::error::{Error, Result};
use crate::kalman::{backward_sample, kalman_filter, StateSpaceModel};
use crate::linalg::{sample_inverse_wishart, symmetrize, VARIANCE_FLOOR};
use crate::series::{Dataset, Period};
use crate::var::VarSpec;

/// Offset `c` in the transform `log(e² + c)` of orthogonalised residuals.
pub const LOG_OFFSET: f64 = 0.001;

/// Observations and lagged regressors for the estimation sample.
#[derive(Debug, Clone)]
pub struct TvpData {
    pub spec: VarSpec,
    pub names: Vec<String>,
    pub start: Period,
    pub y: Vec<DVector<f64>>,
    pub regressors: Vec<DVector<f64>>,
}

impl TvpData {
    /// Uses observations after the first `training` as the estimation sample.
    pub fn new(data: &Dataset, spec: VarSpec, training: usize) -> Result<Self> {
        if data.nvars() != spec.nvars {
            return Err(Error::invalid("dataset does not match the VAR spec"));
        }
        if training < spec.lags || training >= data.nobs() {
            return Err(Error::invalid(format!(
                "training window {training} incompatible with {} observations",
                data.nobs()
            )));
        }
        let m = data.matrix();
        Ok(TvpData {
            spec,
            names: data.names().to_vec(),
            start: data.start().offset(training as i64),
            y: (training..data.nobs()).map(|t| data.row(t)).collect(),
            regressors: (training..data.nobs())
                .map(|t| spec.regressor_row(m, t))
                .collect(),
        })
    }

    pub fn nobs(&self) -> usize {
        self.y.len()
    }

    /// `X_t = I_K ⊗ x_t'`
    pub fn design(&self, t: usize) -> DMatrix<f64> {
        let k = self.spec.nvars;
        let m = self.spec.regressors();
        let mut z = DMatrix::zeros(k, k * m);
        for i in 0..k {
            for (c, v) in self.regressors[t].iter().enumerate() {
                z[(i, i * m + c)] = *v;
            }
        }
        z
    }

    /// `y_t - X_t β_t`
    pub fn residuals(&self, beta: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let k = self.spec.nvars;
        let m = self.spec.regressors();
        (0..self.nobs())
            .map(|t| {
                let x = &self.regressors[t];
                DVector::from_fn(k, |i, _| {
                    self.y[t][i] - beta[t].rows(i * m, m).dot(x)
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StationarityRule {
    pub enabled: bool,
    pub max_rejections: usize,
}

impl StationarityRule {
    pub const OFF: StationarityRule = StationarityRule {
        enabled: false,
        max_rejections: 0,
    };
}

fn floored_log_sd(s: f64) -> f64 {
    s.max(0.5 * VARIANCE_FLOOR.ln())
}

fn is_stationary(spec: &VarSpec, beta: &DVector<f64>) -> bool {
    spec.unpack(beta.as_slice()).spectral_radius() < 1.0
}

/// Draws the coefficient path `β_1..β_T` by forward filtering and backward
/// sampling on `y_t = X_t β_t + u_t`, `u_t ~ N(0, Ω_t)`.
///
/// With the stationarity rule enabled, paths with any explosive `β_t` are
/// redrawn (reusing the forward pass). Returns the path and the number of
/// rejected paths.
#[allow(clippy::too_many_arguments)]
pub fn draw_beta<R: Rng + ?Sized>(
    data: &TvpData,
    alpha: &[DVector<f64>],
    log_sigma: &[DVector<f64>],
    q: &DMatrix<f64>,
    priors: &TvpPriors,
    rule: StationarityRule,
    rng: &mut R,
) -> Result<(Vec<DVector<f64>>, usize)> {
    let t_len = data.nobs();
    let mut design = Vec::with_capacity(t_len);
    let mut obs_cov = Vec::with_capacity(t_len);
    for t in 0..t_len {
        design.push(data.design(t));
        let ls: Vec<f64> = log_sigma[t].iter().map(|s| floored_log_sd(*s)).collect();
        let l = impact_from_factors(alpha[t].as_slice(), &ls);
        let mut omega = &l * l.transpose();
        symmetrize(&mut omega);
        obs_cov.push(omega);
    }
    let model = StateSpaceModel::random_walk(
        design,
        obs_cov,
        q.clone(),
        priors.beta_mean.clone(),
        priors.beta_cov.clone(),
    );
    let filt = kalman_filter(&model, &data.y)?;
    let mut rejections = 0;
    loop {
        let path = backward_sample(&model, &filt, rng);
        if !rule.enabled || path.iter().all(|b| is_stationary(&data.spec, b)) {
            return Ok((path, rejections));
        }
        rejections += 1;
        if rejections > rule.max_rejections {
            return Err(Error::Sampler(format!(
                "no stationary coefficient path after {} rejections",
                rule.max_rejections
            )));
        }
    }
}

/// Draws the free elements of `B_t` equation by equation. In equation `i`,
/// `u_{i,t} = -Σ_{j<i} α_{ij,t} u_{j,t} + exp(σ_{i,t}) ε_{i,t}`.
pub fn draw_alpha<R: Rng + ?Sized>(
    residuals: &[DVector<f64>],
    log_sigma: &[DVector<f64>],
    s_blocks: &[DMatrix<f64>],
    priors: &TvpPriors,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let t_len = residuals.len();
    let k = residuals.first().map_or(0, |r| r.len());
    let n_alpha = k * k.saturating_sub(1) / 2;
    let mut out = vec![DVector::zeros(n_alpha); t_len];
    for (i, range) in (1..k).zip(alpha_blocks(k)) {
        let design = (0..t_len)
            .map(|t| DMatrix::from_fn(1, i, |_, j| -residuals[t][j]))
            .collect();
        let obs_cov = (0..t_len)
            .map(|t| {
                let v = (2.0 * log_sigma[t][i]).exp().max(VARIANCE_FLOOR);
                DMatrix::from_element(1, 1, v)
            })
            .collect();
        let obs: Vec<DVector<f64>> = residuals
            .iter()
            .map(|r| DVector::from_element(1, r[i]))
            .collect();
        let model = StateSpaceModel::random_walk(
            design,
            obs_cov,
            s_blocks[i - 1].clone(),
            priors.alpha_mean.rows(range.start, i).into_owned(),
            block(&priors.alpha_cov, &range),
        );
        let filt = kalman_filter(&model, &obs)?;
        let path = backward_sample(&model, &filt, rng);
        for (t, a) in path.into_iter().enumerate() {
            out[t].rows_mut(range.start, i).copy_from(&a);
        }
    }
    Ok(out)
}

fn block(m: &DMatrix<f64>, range: &Range<usize>) -> DMatrix<f64> {
    m.view((range.start, range.start), (range.len(), range.len()))
        .into_owned()
}

/// `B_t u_t` for every period.
pub fn orthogonalize(residuals: &[DVector<f64>], alpha: &[DVector<f64>]) -> Vec<DVector<f64>> {
    residuals
        .iter()
        .zip(alpha)
        .map(|(u, a)| unit_lower(a.as_slice(), u.len()) * u)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaDraw {
    pub log_sigma: Vec<DVector<f64>>,
    /// Mixture components (1..=7), one row per period.
    pub indicators: Vec<Vec<u8>>,
}

/// Draws mixture indicators given the current log-volatilities, then a new
/// log-volatility path from the conditionally Gaussian model
/// `log(e*² + c) - m_s = 2σ_t + N(0, v_s²)`.
pub fn draw_sigma<R: Rng + ?Sized>(
    orthogonal: &[DVector<f64>],
    log_sigma: &[DVector<f64>],
    w: &DMatrix<f64>,
    priors: &TvpPriors,
    rng: &mut R,
) -> Result<SigmaDraw> {
    let t_len = orthogonal.len();
    let k = priors.log_sigma_mean.len();
    let mut indicators = Vec::with_capacity(t_len);
    let mut obs = Vec::with_capacity(t_len);
    let mut obs_cov = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut row = Vec::with_capacity(k);
        let mut y = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for i in 0..k {
            let ystar = (orthogonal[t][i].powi(2) + LOG_OFFSET).ln();
            let s = mixture::draw_indicator(ystar - 2.0 * log_sigma[t][i], rng);
            let j = (s - 1) as usize;
            y[i] = ystar - component_mean(j);
            h[(i, i)] = VARIANCES[j];
            row.push(s);
        }
        indicators.push(row);
        obs.push(y);
        obs_cov.push(h);
    }
    let model = StateSpaceModel::random_walk(
        vec![DMatrix::identity(k, k) * 2.0; t_len],
        obs_cov,
        w.clone(),
        priors.log_sigma_mean.clone(),
        priors.log_sigma_cov.clone(),
    );
    let filt = kalman_filter(&model, &obs)?;
    Ok(SigmaDraw {
        log_sigma: backward_sample(&model, &filt, rng),
        indicators,
    })
}

/// Inverse-Wishart posterior `(scale, dof)` for the increments of the state
/// elements in `range`: `scale = prior + Σ_t Δx_t Δx_t'`, `dof = prior + T - 1`.
pub fn increment_posterior(
    path: &[DVector<f64>],
    range: Range<usize>,
    prior_scale: &DMatrix<f64>,
    prior_dof: f64,
) -> (DMatrix<f64>, f64) {
    let n = range.len();
    let mut scale = prior_scale.clone();
    for w in path.windows(2) {
        let d = w[1].rows(range.start, n) - w[0].rows(range.start, n);
        scale += &d * d.transpose();
    }
    symmetrize(&mut scale);
    (scale, prior_dof + path.len().saturating_sub(1) as f64)
}

pub fn draw_increment_covariance<R: Rng + ?Sized>(
    path: &[DVector<f64>],
    range: Range<usize>,
    prior_scale: &DMatrix<f64>,
    prior_dof: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (scale, dof) = increment_posterior(path, range, prior_scale, prior_dof);
    sample_inverse_wishart(&scale, dof, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub q: DMatrix<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub w: DMatrix<f64>,
}

impl Hyperparameters {
    /// Prior scale over degrees of freedom, used to start the chain.
    pub fn initial(priors: &TvpPriors) -> Self {
        Hyperparameters {
            q: &priors.q_scale / priors.q_dof,
            s: priors
                .s_scales
                .iter()
                .zip(&priors.s_dofs)
                .map(|(s, d)| s / *d)
                .collect(),
            w: &priors.w_scale / priors.w_dof,
        }
    }
}

/// Draws `Q`, the blocks of `S`, and `W` from their inverse-Wishart conditionals.
pub fn draw_hyper<R: Rng + ?Sized>(
    beta: &[DVector<f64>],
    alpha: &[DVector<f64>],
    log_sigma: &[DVector<f64>],
    priors: &TvpPriors,
    rng: &mut R,
) -> Result<Hyperparameters> {
    let n_beta = priors.beta_mean.len();
    let q = draw_increment_covariance(beta, 0..n_beta, &priors.q_scale, priors.q_dof, rng)?;
    let s = priors
        .alpha_blocks()
        .into_iter()
        .zip(priors.s_scales.iter().zip(&priors.s_dofs))
        .map(|(range, (scale, dof))| draw_increment_covariance(alpha, range, scale, *dof, rng))
        .collect::<Result<_>>()?;
    let k = priors.log_sigma_mean.len();
    let w = draw_increment_covariance(log_sigma, 0..k, &priors.w_scale, priors.w_dof, rng)?;
    Ok(Hyperparameters { q, s, w })
}
