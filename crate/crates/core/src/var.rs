//! Constant-parameter reduced-form VAR: least squares, lag selection,
//! recursive identification, impulse responses and simulation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, companion, spectral_radius};
use crate::series::{least_squares_multi, Dataset, Frequency, Period};

/// Observations discarded before the recorded sample in the simulators.
pub const SIMULATION_BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSpec {
    pub nvars: usize,
    pub lags: usize,
    pub intercept: bool,
}

impl VarSpec {
    pub fn new(nvars: usize, lags: usize, intercept: bool) -> Result<Self> {
        if nvars == 0 || lags == 0 {
            return Err(Error::invalid("VAR needs at least one variable and one lag"));
        }
        Ok(VarSpec {
            nvars,
            lags,
            intercept,
        })
    }

    /// Regressors per equation.
    pub fn regressors(&self) -> usize {
        self.nvars * self.lags + usize::from(self.intercept)
    }

    /// Length of the stacked coefficient vector, equation by equation.
    pub fn n_coefficients(&self) -> usize {
        self.nvars * self.regressors()
    }

    /// Below-diagonal elements of a K×K unit-lower-triangular matrix.
    pub fn n_contemporaneous(&self) -> usize {
        self.nvars * (self.nvars - 1) / 2
    }

    /// Regressor row `[1, y_{t-1}', …, y_{t-p}']` for observation `t` (needs `t >= p`).
    pub fn regressor_row(&self, data: &DMatrix<f64>, t: usize) -> DVector<f64> {
        let k = self.nvars;
        let mut x = DVector::zeros(self.regressors());
        let mut at = 0;
        if self.intercept {
            x[0] = 1.0;
            at = 1;
        }
        for lag in 1..=self.lags {
            for j in 0..k {
                x[at] = data[(t - lag, j)];
                at += 1;
            }
        }
        x
    }

    /// Splits a stacked coefficient vector into intercept and lag matrices.
    /// The vector holds, for each equation `i`, `[c_i, A_1[i,:], …, A_p[i,:]]`.
    pub fn unpack(&self, beta: &[f64]) -> VarCoefficients {
        let k = self.nvars;
        let m = self.regressors();
        let mut intercept = DVector::zeros(k);
        let mut lags = vec![DMatrix::zeros(k, k); self.lags];
        for i in 0..k {
            let row = &beta[i * m..(i + 1) * m];
            let mut at = 0;
            if self.intercept {
                intercept[i] = row[0];
                at = 1;
            }
            for a in lags.iter_mut() {
                for j in 0..k {
                    a[(i, j)] = row[at];
                    at += 1;
                }
            }
        }
        VarCoefficients { intercept, lags }
    }

    pub fn pack(&self, coefs: &VarCoefficients) -> DVector<f64> {
        let k = self.nvars;
        let m = self.regressors();
        let mut beta = DVector::zeros(k * m);
        for i in 0..k {
            let mut at = i * m;
            if self.intercept {
                beta[at] = coefs.intercept[i];
                at += 1;
            }
            for a in &coefs.lags {
                for j in 0..k {
                    beta[at] = a[(i, j)];
                    at += 1;
                }
            }
        }
        beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarCoefficients {
    pub intercept: DVector<f64>,
    pub lags: Vec<DMatrix<f64>>,
}

impl VarCoefficients {
    pub fn companion(&self) -> DMatrix<f64> {
        companion(&self.lags)
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.companion())
    }
}

/// Parameters of a Gaussian VAR used for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct VarParams {
    pub coefficients: VarCoefficients,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct VarEstimate {
    pub spec: VarSpec,
    pub coefficients: VarCoefficients,
    /// Residual covariance, cross-product over the effective sample size.
    pub covariance: DMatrix<f64>,
    pub log_likelihood: f64,
    pub nobs: usize,
    /// `(X'X)^{-1}` of the per-equation regressors.
    pub xtx_inv: DMatrix<f64>,
    /// Residuals, one row per effective observation.
    pub residuals: DMatrix<f64>,
}

impl VarEstimate {
    /// Stacked coefficients in the layout of [`VarSpec::unpack`].
    pub fn beta(&self) -> DVector<f64> {
        self.spec.pack(&self.coefficients)
    }

    /// Asymptotic covariance of [`VarEstimate::beta`]: `Ω ⊗ (X'X)^{-1}`.
    pub fn beta_covariance(&self) -> DMatrix<f64> {
        self.covariance.kronecker(&self.xtx_inv)
    }

    pub fn params(&self) -> VarParams {
        VarParams {
            coefficients: self.coefficients.clone(),
            covariance: self.covariance.clone(),
        }
    }
}

/// Equation-by-equation least squares on lagged regressors.
pub fn ols_var_fit(data: &Dataset, spec: VarSpec) -> Result<VarEstimate> {
    fit_from(data.matrix(), spec, spec.lags)
}

/// Least squares using observations `first..T` as left-hand side.
pub(crate) fn fit_from(y: &DMatrix<f64>, spec: VarSpec, first: usize) -> Result<VarEstimate> {
    let k = spec.nvars;
    if y.ncols() != k {
        return Err(Error::invalid(format!(
            "data has {} variables, spec expects {k}",
            y.ncols()
        )));
    }
    if first < spec.lags {
        return Err(Error::invalid("sample start precedes available lags"));
    }
    let t_total = y.nrows();
    let m = spec.regressors();
    if t_total <= first || t_total - first <= m + k {
        return Err(Error::invalid(format!(
            "{} observations cannot support {m} regressors per equation",
            t_total.saturating_sub(first)
        )));
    }
    let n = t_total - first;
    let x = DMatrix::from_fn(n, m, |r, c| spec.regressor_row(y, first + r)[c]);
    let lhs = y.rows(first, n).into_owned();
    let b = least_squares_multi(&x, &lhs)
        .map_err(|_| Error::Singular("VAR regressor cross-product is singular".into()))?;
    let residuals = &lhs - &x * &b;
    let covariance = linalg::symmetrized(residuals.transpose() * &residuals / n as f64);
    let xtx_inv = (x.transpose() * &x)
        .cholesky()
        .ok_or_else(|| Error::Singular("VAR regressor cross-product is singular".into()))?
        .inverse();
    // Column i of b holds equation i.
    let beta: Vec<f64> = (0..k).flat_map(|i| b.column(i).iter().copied().collect::<Vec<_>>()).collect();
    let coefficients = spec.unpack(&beta);
    let log_likelihood = match linalg::log_det_spd(&covariance) {
        Ok(ld) => {
            -0.5 * n as f64 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + ld + k as f64)
        }
        Err(_) => f64::NEG_INFINITY,
    };
    Ok(VarEstimate {
        spec,
        coefficients,
        covariance,
        log_likelihood,
        nobs: n,
        xtx_inv,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagCriteria {
    pub lags: usize,
    pub log_det: f64,
    pub aic: f64,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagSelection {
    pub aic: usize,
    pub bic: usize,
    pub table: Vec<LagCriteria>,
}

/// Information-criterion lag selection over `1..=p_max` on the common sample
/// that starts after the first `p_max` observations.
///
/// `AIC = ln|Ω̂| + 2m/T` and `BIC = ln|Ω̂| + m ln(T)/T` with `m` the number of
/// estimated mean parameters.
pub fn select_lag(data: &Dataset, p_max: usize, intercept: bool) -> Result<LagSelection> {
    if p_max == 0 {
        return Err(Error::invalid("p_max must be at least 1"));
    }
    let k = data.nvars();
    let mut table = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let spec = VarSpec::new(k, p, intercept)?;
        let est = fit_from(data.matrix(), spec, p_max)?;
        let log_det = linalg::log_det_spd(&est.covariance)?;
        let t = est.nobs as f64;
        let m = spec.n_coefficients() as f64;
        table.push(LagCriteria {
            lags: p,
            log_det,
            aic: log_det + 2.0 * m / t,
            bic: log_det + m * t.ln() / t,
        });
    }
    let argmin = |f: fn(&LagCriteria) -> f64| {
        table
            .iter()
            .min_by(|a, b| f(a).total_cmp(&f(b)))
            .map(|c| c.lags)
            .unwrap()
    };
    Ok(LagSelection {
        aic: argmin(|c| c.aic),
        bic: argmin(|c| c.bic),
        table,
    })
}

/// Lower-triangular impact matrix with positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactMatrix(DMatrix<f64>);

impl ImpactMatrix {
    /// Wraps a matrix already known to be lower triangular with positive diagonal.
    pub fn from_lower(l: DMatrix<f64>) -> Result<Self> {
        let n = l.nrows();
        if !l.is_square() {
            return Err(Error::invalid("impact matrix must be square"));
        }
        for i in 0..n {
            if l[(i, i)].is_nan() || l[(i, i)] <= 0.0 {
                return Err(Error::invalid("impact matrix diagonal must be positive"));
            }
            for j in (i + 1)..n {
                if l[(i, j)] != 0.0 {
                    return Err(Error::invalid("impact matrix must be lower triangular"));
                }
            }
        }
        Ok(ImpactMatrix(l))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.0 * self.0.transpose()
    }
}

/// Recursive identification: the Cholesky factor of `Ω`.
pub fn cholesky_impact(cov: &DMatrix<f64>) -> Result<ImpactMatrix> {
    if !cov.is_square() {
        return Err(Error::invalid("covariance must be square"));
    }
    let scale = cov.amax().max(1.0);
    if (cov - cov.transpose()).amax() > 1e-10 * scale {
        return Err(Error::invalid("covariance is not symmetric"));
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("reduced-form covariance".into()))?;
    Ok(ImpactMatrix(chol.unpack()))
}

/// A structural shock: 0-based variable index, sign (±1) and size in
/// standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockSpec {
    pub variable: usize,
    pub sign: f64,
    pub size: f64,
}

impl ShockSpec {
    /// Negative one-standard-deviation shock to `variable`.
    pub fn negative(variable: usize) -> Self {
        ShockSpec {
            variable,
            sign: -1.0,
            size: 1.0,
        }
    }

    pub fn scale(&self) -> f64 {
        self.sign * self.size
    }
}

/// Moving-average recursion: `r_0 = impact_column`, `r_h = Σ_i A_i r_{h-i}`.
/// Returns a K×(H+1) matrix.
pub fn propagate(lags: &[DMatrix<f64>], impact_column: &DVector<f64>, horizon: usize) -> DMatrix<f64> {
    let k = impact_column.len();
    let mut out = DMatrix::zeros(k, horizon + 1);
    out.set_column(0, impact_column);
    for h in 1..=horizon {
        let mut r = DVector::zeros(k);
        for (i, a) in lags.iter().enumerate().take(h) {
            r += a * out.column(h - 1 - i);
        }
        out.set_column(h, &r);
    }
    out
}

/// Impulse responses of all variables to `shock` under recursive identification.
pub fn irf_constant(
    lags: &[DMatrix<f64>],
    impact: &ImpactMatrix,
    horizon: usize,
    shock: ShockSpec,
) -> Result<DMatrix<f64>> {
    let k = impact.matrix().nrows();
    if shock.variable >= k {
        return Err(Error::invalid(format!(
            "shock variable {} outside 0..{k}",
            shock.variable
        )));
    }
    if lags.iter().any(|a| a.nrows() != k || a.ncols() != k) {
        return Err(Error::invalid("lag matrices do not match the impact matrix"));
    }
    let column = impact.matrix().column(shock.variable) * shock.scale();
    Ok(propagate(lags, &column, horizon))
}

/// One step of the VAR recursion: `c + Σ A_i y_{t-i} + impact·ε`.
pub(crate) fn var_step(
    coefs: &VarCoefficients,
    history: &DMatrix<f64>,
    t: usize,
    impact: &DMatrix<f64>,
    eps: &DVector<f64>,
) -> DVector<f64> {
    let mut y = coefs.intercept.clone();
    for (i, a) in coefs.lags.iter().enumerate() {
        if t > i {
            y += a * history.row(t - 1 - i).transpose();
        }
    }
    y + impact * eps
}

/// Simulates `nobs` observations after [`SIMULATION_BURN_IN`] discarded
/// draws, starting from zeros. Unstable parameters are refused unless
/// `allow_unstable` is set.
pub fn simulate_var(
    params: &VarParams,
    nobs: usize,
    seed: u64,
    allow_unstable: bool,
) -> Result<Dataset> {
    let k = params.covariance.nrows();
    let radius = params.coefficients.spectral_radius();
    if !allow_unstable && radius >= 1.0 {
        return Err(Error::Unstable(format!(
            "companion spectral radius {radius:.4} >= 1"
        )));
    }
    let impact = cholesky_impact(&params.covariance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = SIMULATION_BURN_IN + nobs;
    let mut y = DMatrix::zeros(total, k);
    for t in 0..total {
        let eps = linalg::standard_normal_vector(k, &mut rng);
        let row = var_step(&params.coefficients, &y, t, impact.matrix(), &eps);
        y.set_row(t, &row.transpose());
    }
    synthetic_dataset(y.rows(SIMULATION_BURN_IN, nobs).into_owned())
}

/// Wraps a simulated matrix as a monthly dataset starting 2000-01 with
/// variables named `y1..yK`.
pub fn synthetic_dataset(matrix: DMatrix<f64>) -> Result<Dataset> {
    let names = (1..=matrix.ncols()).map(|j| format!("y{j}")).collect();
    Dataset::new(names, Period::new(2000, 1, Frequency::Monthly)?, matrix)
}
