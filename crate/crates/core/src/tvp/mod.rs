//! Gibbs sampler for the time-varying-parameter VAR with stochastic volatility.
//!
//! The model, for observations `t = 1..T` after a training window:
//!
//! ```text
//! y_t = X_t β_t + B_t⁻¹ Σ_t ε_t,       ε_t ~ N(0, I)
//! β_{t+1} = β_t + ν_t,                 ν_t ~ N(0, Q)
//! α_{t+1} = α_t + ζ_t,                 ζ_t ~ N(0, S),  S block-diagonal by equation
//! σ_{t+1} = σ_t + η_t,                 η_t ~ N(0, W)
//! ```
//!
//! `B_t` is unit lower triangular with free elements `α_t` (row by row) and
//! `Σ_t = diag(exp σ_t)`.

mod gibbs;
pub mod io;
pub mod mixture;
mod steps;

use nalgebra::{DMatrix, DVector};

pub use gibbs::{gibbs_run, NoProgress, ProgressSink};
pub use steps::{
    draw_alpha, draw_beta, draw_hyper, draw_increment_covariance, draw_sigma,
    increment_posterior, orthogonalize, Hyperparameters, SigmaDraw, StationarityRule, TvpData,
    LOG_OFFSET,
};

use crate::error::{Error, Result};
use crate::linalg::{block_diagonal, symmetrized};
use crate::series::{Dataset, Period};
use crate::var::{fit_from, VarCoefficients, VarSpec};

/// Scales applied to the training-sample covariances in the hyperparameter priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorScales {
    pub k_q: f64,
    pub k_s: f64,
    pub k_w: f64,
}

impl Default for PriorScales {
    fn default() -> Self {
        PriorScales {
            k_q: 0.01,
            k_s: 0.1,
            k_w: 0.01,
        }
    }
}

pub const DEFAULT_TRAINING: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct TvpPriors {
    pub training: usize,
    pub scales: PriorScales,
    pub beta_mean: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    pub alpha_mean: DVector<f64>,
    /// Block diagonal by equation.
    pub alpha_cov: DMatrix<f64>,
    pub log_sigma_mean: DVector<f64>,
    pub log_sigma_cov: DMatrix<f64>,
    pub q_scale: DMatrix<f64>,
    pub q_dof: f64,
    /// One block per equation `2..=K`; block `i` is `i × i` (1-based equation `i + 1`).
    pub s_scales: Vec<DMatrix<f64>>,
    pub s_dofs: Vec<f64>,
    pub w_scale: DMatrix<f64>,
    pub w_dof: f64,
}

impl TvpPriors {
    /// Offsets of the per-equation α blocks.
    pub fn alpha_blocks(&self) -> Vec<std::ops::Range<usize>> {
        alpha_blocks(self.log_sigma_mean.len())
    }

    /// Checks the structural invariants (positive scales, proper degrees of freedom).
    pub fn validate(&self, spec: &VarSpec) -> Result<()> {
        let PriorScales { k_q, k_s, k_w } = self.scales;
        if !(k_q > 0.0 && k_s > 0.0 && k_w > 0.0) {
            return Err(Error::invalid("prior scales must be positive"));
        }
        let k = spec.nvars;
        let checks = [
            ("Q", self.q_dof, spec.n_coefficients()),
            ("W", self.w_dof, k),
        ];
        for (name, dof, dim) in checks {
            if dof <= dim as f64 - 1.0 {
                return Err(Error::invalid(format!(
                    "{name} prior degrees of freedom {dof} must exceed {}",
                    dim as f64 - 1.0
                )));
            }
        }
        for (i, dof) in self.s_dofs.iter().enumerate() {
            if *dof <= i as f64 {
                return Err(Error::invalid(format!(
                    "S block {} degrees of freedom {dof} must exceed {i}",
                    i + 1
                )));
            }
        }
        if self.beta_mean.len() != spec.n_coefficients()
            || self.alpha_mean.len() != spec.n_contemporaneous()
            || self.log_sigma_mean.len() != k
        {
            return Err(Error::invalid("prior dimensions do not match the VAR spec"));
        }
        Ok(())
    }

    /// Prior on `(Q, S, W)` rescaled to new `k` values, leaving the state priors untouched.
    pub fn with_scales(&self, scales: PriorScales) -> TvpPriors {
        let mut p = self.clone();
        let r = |new: f64, old: f64| (new / old).powi(2);
        p.q_scale *= r(scales.k_q, self.scales.k_q);
        for s in &mut p.s_scales {
            *s *= r(scales.k_s, self.scales.k_s);
        }
        p.w_scale *= r(scales.k_w, self.scales.k_w);
        p.scales = scales;
        p
    }
}

pub(crate) fn alpha_blocks(nvars: usize) -> Vec<std::ops::Range<usize>> {
    let mut at = 0;
    (1..nvars)
        .map(|i| {
            let r = at..at + i;
            at += i;
            r
        })
        .collect()
}

/// Calibrates the priors from a constant-parameter VAR fitted by least
/// squares on the first `training` observations.
///
/// * `β_0 ~ N(β̂, 4·V̂(β̂))`
/// * `α_0 ~ N(α̂, 4·V̂(α̂))`, with `α̂` from the Cholesky factor of `Ω̂`
/// * `σ_0 ~ N(ln ŝ, I)`, `ŝ` the orthogonalised residual standard deviations
/// * `Q ~ IW(k_Q²·ν_Q·V̂(β̂), ν_Q)`, `ν_Q = max(τ, dim + 1)`
/// * `S_i ~ IW(k_S²·ν_i·V̂(α̂_i), ν_i)`, `ν_i = i + 1`
/// * `W ~ IW(k_W²·ν_W·I, ν_W)`, `ν_W = K + 1`
pub fn init_priors(
    data: &Dataset,
    spec: VarSpec,
    training: usize,
    scales: PriorScales,
) -> Result<TvpPriors> {
    let k = spec.nvars;
    if data.nvars() != k {
        return Err(Error::invalid(format!(
            "dataset has {} variables, spec expects {k}",
            data.nvars()
        )));
    }
    if training < k * spec.lags + k + 2 {
        return Err(Error::invalid(format!(
            "training window {training} shorter than K·p + K + 2 = {}",
            k * spec.lags + k + 2
        )));
    }
    if data.nobs() <= training + spec.lags {
        return Err(Error::invalid(format!(
            "{} observations do not exceed training window {training} plus {} lags",
            data.nobs(),
            spec.lags
        )));
    }
    let train = data.matrix().rows(0, training).into_owned();
    let est = fit_from(&train, spec, spec.lags).map_err(|e| {
        Error::invalid(format!("training window of {training} observations too short: {e}"))
    })?;

    let beta_mean = est.beta();
    let beta_var = symmetrized(est.beta_covariance());

    let chol = est
        .covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("training residual covariance".into()))?
        .unpack();
    let sd = chol.diagonal();
    let l_inv = chol
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("training Cholesky factor".into()))?;
    let b = DMatrix::from_diagonal(&sd) * l_inv;

    let mut alpha_mean = DVector::zeros(spec.n_contemporaneous());
    let mut alpha_var_blocks = Vec::with_capacity(k.saturating_sub(1));
    for (i, range) in (1..k).zip(alpha_blocks(k)) {
        for (j, idx) in range.clone().enumerate() {
            alpha_mean[idx] = b[(i, j)];
        }
        // Regression of u_i on -u_<i has coefficient α and variance ŝ_i² (U'U)⁻¹.
        let u = est.residuals.columns(0, i).into_owned();
        let utu = u.transpose() * &u;
        let inv = utu
            .cholesky()
            .ok_or_else(|| Error::Singular("training residual cross-product".into()))?
            .inverse();
        alpha_var_blocks.push(symmetrized(inv * sd[i].powi(2)));
    }

    let n_beta = spec.n_coefficients();
    let q_dof = (training as f64).max(n_beta as f64 + 1.0);
    let s_dofs: Vec<f64> = (1..k).map(|i| i as f64 + 1.0).collect();
    let w_dof = k as f64 + 1.0;
    let PriorScales { k_q, k_s, k_w } = scales;

    let priors = TvpPriors {
        training,
        scales,
        beta_cov: &beta_var * 4.0,
        beta_mean,
        alpha_mean,
        alpha_cov: block_diagonal(&alpha_var_blocks) * 4.0,
        log_sigma_mean: sd.map(f64::ln),
        log_sigma_cov: DMatrix::identity(k, k),
        q_scale: &beta_var * (k_q * k_q * q_dof),
        q_dof,
        s_scales: alpha_var_blocks
            .iter()
            .zip(&s_dofs)
            .map(|(v, dof)| v * (k_s * k_s * dof))
            .collect(),
        s_dofs,
        w_scale: DMatrix::identity(k, k) * (k_w * k_w * w_dof),
        w_dof,
    };
    priors.validate(&spec)?;
    Ok(priors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McmcSettings {
    /// Total sweeps, including burn-in.
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub stationarity_rejection: bool,
    pub max_rejections: usize,
}

impl McmcSettings {
    /// 55,000 sweeps, 5,000 burn-in, every tenth kept.
    pub fn full(seed: u64) -> Self {
        McmcSettings {
            draws: 55_000,
            burn_in: 5_000,
            thin: 10,
            seed,
            stationarity_rejection: true,
            max_rejections: 100,
        }
    }

    /// Small profile for tests and quick runs: 2,000 sweeps, 500 burn-in.
    pub fn desk(seed: u64) -> Self {
        McmcSettings {
            draws: 2_000,
            burn_in: 500,
            thin: 1,
            ..McmcSettings::full(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws <= self.burn_in {
            return Err(Error::invalid("draws must exceed burn-in"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.draws - self.burn_in) / self.thin
    }
}

/// One retained sweep. Path matrices have one row per estimation period.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    pub beta: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
    pub log_sigma: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub w: DMatrix<f64>,
}

impl PosteriorDraw {
    pub fn coefficients(&self, spec: &VarSpec, t: usize) -> VarCoefficients {
        let row: Vec<f64> = self.beta.row(t).iter().copied().collect();
        spec.unpack(&row)
    }

    /// `B_t`
    pub fn contemporaneous(&self, t: usize) -> DMatrix<f64> {
        let a: Vec<f64> = self.alpha.row(t).iter().copied().collect();
        unit_lower(&a, self.log_sigma.ncols())
    }

    /// `B_t⁻¹ Σ_t`
    pub fn impact(&self, t: usize) -> DMatrix<f64> {
        let a: Vec<f64> = self.alpha.row(t).iter().copied().collect();
        let s: Vec<f64> = self.log_sigma.row(t).iter().copied().collect();
        impact_from_factors(&a, &s)
    }

    /// `Ω_t = B_t⁻¹ Σ_t Σ_t' B_t⁻ᵀ`
    pub fn covariance(&self, t: usize) -> DMatrix<f64> {
        let l = self.impact(t);
        &l * l.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SamplerDiagnostics {
    pub sweeps: usize,
    pub failed_sweeps: usize,
    pub stationarity_rejections: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvpPosterior {
    pub spec: VarSpec,
    pub names: Vec<String>,
    /// First period of the estimation sample.
    pub start: Period,
    pub nobs: usize,
    pub draws: Vec<PosteriorDraw>,
    pub diagnostics: SamplerDiagnostics,
}

impl TvpPosterior {
    pub fn end(&self) -> Period {
        self.start.offset(self.nobs as i64 - 1)
    }

    pub fn index_of(&self, period: &Period) -> Option<usize> {
        let d = self.start.periods_until(period)?;
        (d >= 0 && (d as usize) < self.nobs).then_some(d as usize)
    }
}

/// Unit-lower-triangular matrix with `alpha` filling the strict lower
/// triangle row by row.
pub fn unit_lower(alpha: &[f64], nvars: usize) -> DMatrix<f64> {
    let mut b = DMatrix::identity(nvars, nvars);
    let mut at = 0;
    for i in 1..nvars {
        for j in 0..i {
            b[(i, j)] = alpha[at];
            at += 1;
        }
    }
    b
}

/// `B⁻¹ Σ` for the given free elements and log standard deviations.
pub fn impact_from_factors(alpha: &[f64], log_sigma: &[f64]) -> DMatrix<f64> {
    let k = log_sigma.len();
    let b = unit_lower(alpha, k);
    let sigma = DMatrix::from_diagonal(&DVector::from_iterator(k, log_sigma.iter().map(|s| s.exp())));
    // Forward substitution on a unit lower-triangular system is exact in structure.
    b.solve_lower_triangular(&sigma)
        .expect("unit lower-triangular matrix is invertible")
}

/// Reduced-form covariance `Ω = B⁻¹ Σ Σ' B⁻ᵀ`.
pub fn covariance_from_factors(alpha: &[f64], log_sigma: &[f64]) -> DMatrix<f64> {
    let l = impact_from_factors(alpha, log_sigma);
    symmetrized(&l * l.transpose())
}
