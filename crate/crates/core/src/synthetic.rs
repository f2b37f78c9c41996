//! Data-generating processes with known truth, for recovery tests and demos.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kalman::StateSpaceModel;
use crate::linalg::{is_positive_definite, sample_mvn, standard_normal_vector, symmetrized};
use crate::series::Dataset;
use crate::tvp::covariance_from_factors;
use crate::var::{cholesky_impact, synthetic_dataset, var_step, VarSpec, SIMULATION_BURN_IN};

/// Consecutive explosive proposals tolerated at one date before giving up.
pub const MAX_EXPLOSIVE_STREAK: usize = 50;

/// Random-walk TVP-VAR-SV generator. `s` is the full covariance of the
/// α increments; any of `q`, `s`, `w` may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub var: VarSpec,
    pub nobs: usize,
    pub beta0: DVector<f64>,
    pub alpha0: DVector<f64>,
    pub log_sigma0: DVector<f64>,
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub seed: u64,
    /// Redraw β increments that would make the VAR explosive.
    pub reject_explosive: bool,
}

impl SyntheticSpec {
    /// Constant parameters: all innovation covariances zero.
    pub fn constant(var: VarSpec, nobs: usize, beta: DVector<f64>, alpha: DVector<f64>, log_sigma: DVector<f64>, seed: u64) -> Self {
        let (nb, na, k) = (var.n_coefficients(), var.n_contemporaneous(), var.nvars);
        SyntheticSpec {
            var,
            nobs,
            beta0: beta,
            alpha0: alpha,
            log_sigma0: log_sigma,
            q: DMatrix::zeros(nb, nb),
            s: DMatrix::zeros(na, na),
            w: DMatrix::zeros(k, k),
            seed,
            reject_explosive: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (nb, na, k) = (
            self.var.n_coefficients(),
            self.var.n_contemporaneous(),
            self.var.nvars,
        );
        if self.nobs == 0 {
            return Err(Error::invalid("nobs must be positive"));
        }
        if self.beta0.len() != nb || self.alpha0.len() != na || self.log_sigma0.len() != k {
            return Err(Error::invalid("initial states do not match the VAR spec"));
        }
        for (name, m, n) in [("Q", &self.q, nb), ("S", &self.s, na), ("W", &self.w, k)] {
            if m.shape() != (n, n) {
                return Err(Error::invalid(format!("{name} must be {n}×{n}")));
            }
            let plus = m + DMatrix::identity(n, n) * 1e-12 * m.amax().max(1e-300);
            if n > 0 && m.amax() > 0.0 && !is_positive_definite(&symmetrized(plus)) {
                return Err(Error::invalid(format!("{name} is not positive semidefinite")));
            }
        }
        Ok(())
    }
}

/// True parameter paths, one entry per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthPaths {
    pub beta: Vec<DVector<f64>>,
    pub alpha: Vec<DVector<f64>>,
    pub log_sigma: Vec<DVector<f64>>,
}

impl TruthPaths {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

fn stable(var: &VarSpec, beta: &DVector<f64>) -> bool {
    var.unpack(beta.as_slice()).spectral_radius() < 1.0
}

/// Simulates the random walks and then the observations.
///
/// Parameters are held at their initial values through
/// [`SIMULATION_BURN_IN`] discarded periods and evolve from the first kept
/// observation. Increments are drawn only for nonzero covariances, so with
/// `Q = S = W = 0` the output equals [`crate::var::simulate_var`] run with the
/// same seed and the implied constant parameters.
pub fn simulate_tvp(spec: &SyntheticSpec) -> Result<(Dataset, TruthPaths)> {
    spec.validate()?;
    let var = spec.var;
    let k = var.nvars;
    if spec.reject_explosive && !stable(&var, &spec.beta0) {
        return Err(Error::Unstable("initial coefficients are explosive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (zero_q, zero_s, zero_w) = (spec.q.amax() == 0.0, spec.s.amax() == 0.0, spec.w.amax() == 0.0);
    let mut beta = spec.beta0.clone();
    let mut alpha = spec.alpha0.clone();
    let mut log_sigma = spec.log_sigma0.clone();
    let mut truth = TruthPaths {
        beta: Vec::with_capacity(spec.nobs),
        alpha: Vec::with_capacity(spec.nobs),
        log_sigma: Vec::with_capacity(spec.nobs),
    };
    let total = SIMULATION_BURN_IN + spec.nobs;
    let mut y = DMatrix::zeros(total, k);
    for t in 0..total {
        if t > SIMULATION_BURN_IN {
            if !zero_q {
                let mut streak = 0;
                loop {
                    let next = sample_mvn(&beta, &spec.q, &mut rng);
                    if !spec.reject_explosive || stable(&var, &next) {
                        beta = next;
                        break;
                    }
                    streak += 1;
                    if streak > MAX_EXPLOSIVE_STREAK {
                        return Err(Error::Unstable(format!(
                            "{streak} consecutive explosive coefficient draws at t = {}",
                            t - SIMULATION_BURN_IN
                        )));
                    }
                }
            }
            if !zero_s {
                alpha = sample_mvn(&alpha, &spec.s, &mut rng);
            }
            if !zero_w {
                log_sigma = sample_mvn(&log_sigma, &spec.w, &mut rng);
            }
        }
        if t >= SIMULATION_BURN_IN {
            truth.beta.push(beta.clone());
            truth.alpha.push(alpha.clone());
            truth.log_sigma.push(log_sigma.clone());
        }
        let omega = covariance_from_factors(alpha.as_slice(), log_sigma.as_slice());
        let impact = cholesky_impact(&omega)?;
        let eps = standard_normal_vector(k, &mut rng);
        let row = var_step(&var.unpack(beta.as_slice()), &y, t, impact.matrix(), &eps);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!("non-finite observation at t = {t}")));
        }
        y.set_row(t, &row.transpose());
    }
    let data = synthetic_dataset(y.rows(SIMULATION_BURN_IN, spec.nobs).into_owned())?;
    Ok((data, truth))
}

/// Observations generated along given parameter paths, with the first
/// entry held through the burn-in.
pub fn simulate_from_paths(var: VarSpec, truth: &TruthPaths, seed: u64) -> Result<Dataset> {
    let k = var.nvars;
    let n = truth.len();
    if n == 0 || truth.alpha.len() != n || truth.log_sigma.len() != n {
        return Err(Error::invalid("truth paths must be non-empty and of equal length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = SIMULATION_BURN_IN + n;
    let mut y = DMatrix::zeros(total, k);
    for t in 0..total {
        let i = t.saturating_sub(SIMULATION_BURN_IN);
        let omega = covariance_from_factors(truth.alpha[i].as_slice(), truth.log_sigma[i].as_slice());
        let impact = cholesky_impact(&omega)?;
        let eps = standard_normal_vector(k, &mut rng);
        let row = var_step(&var.unpack(truth.beta[i].as_slice()), &y, t, impact.matrix(), &eps);
        y.set_row(t, &row.transpose());
    }
    synthetic_dataset(y.rows(SIMULATION_BURN_IN, n).into_owned())
}

/// Local-level model with its exact smoothed state means.
#[derive(Debug, Clone)]
pub struct LocalLevelOracle {
    pub model: StateSpaceModel,
    pub smoothed_means: Vec<f64>,
}

/// Builds the local-level model for `observations` and computes
/// `E[x | y] = m₀ + C (C + r I)⁻¹ (y - m₀)` with `C_ij = p₀ + q·min(i, j)`,
/// the prior covariance of the level path.
pub fn analytic_local_level(
    q: f64,
    r: f64,
    observations: &[f64],
    init_mean: f64,
    init_var: f64,
) -> Result<LocalLevelOracle> {
    if !(q >= 0.0 && r > 0.0 && init_var > 0.0) {
        return Err(Error::invalid("local level needs q >= 0, r > 0 and a positive initial variance"));
    }
    let n = observations.len();
    let c = DMatrix::from_fn(n, n, |i, j| init_var + q * i.min(j) as f64);
    let cov_y = &c + DMatrix::identity(n, n) * r;
    let dev = DVector::from_iterator(n, observations.iter().map(|y| y - init_mean));
    let solved = cov_y
        .lu()
        .solve(&dev)
        .ok_or_else(|| Error::Singular("local-level observation covariance".into()))?;
    let means = (c * solved).map(|v| v + init_mean);
    Ok(LocalLevelOracle {
        model: StateSpaceModel::local_level(q, r, init_mean, init_var, n),
        smoothed_means: means.iter().copied().collect(),
    })
}
