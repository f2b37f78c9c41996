//! Small dense linear-algebra and sampling helpers shared by the estimators.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Floor applied to variances and eigenvalues before taking square roots.
pub const VARIANCE_FLOOR: f64 = 1e-12;

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn symmetrized(mut m: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&mut m);
    m
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// A square-root factor `S` with `S Sᵀ = cov` for a symmetric positive
/// semidefinite matrix. Cholesky is tried first; rank-deficient inputs fall
/// back to a clamped eigendecomposition.
pub fn psd_sqrt(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let cov = symmetrized(cov.clone());
    if let Some(chol) = cov.clone().cholesky() {
        return chol.unpack();
    }
    let eig = SymmetricEigen::new(cov);
    let mut factor = eig.eigenvectors;
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = if *lambda > 0.0 { lambda.sqrt() } else { 0.0 };
        factor.column_mut(j).scale_mut(s);
    }
    factor
}

/// One draw from `N(mean, cov)`; `cov` may be singular.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let z = standard_normal_vector(mean.len(), rng);
    mean + psd_sqrt(cov) * z
}

/// Solves `a x = b` for symmetric positive (semi)definite `a`, falling back to
/// the pseudo-inverse when `a` is singular.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let a = symmetrized(a.clone());
    if let Some(chol) = a.clone().cholesky() {
        return chol.solve(b);
    }
    let pinv = a
        .pseudo_inverse(1e-14)
        .unwrap_or_else(|_| DMatrix::zeros(b.nrows(), b.nrows()));
    pinv * b
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.is_square() && symmetrized(m.clone()).cholesky().is_some()
}

/// Log-determinant of a symmetric positive definite matrix.
pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = symmetrized(m.clone())
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("log-determinant".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Draw from the Wishart distribution with `dof` degrees of freedom and
/// scale `scale` using the Bartlett decomposition.
pub fn sample_wishart<R: Rng + ?Sized>(
    scale: &DMatrix<f64>,
    dof: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = scale.nrows();
    if dof <= (n as f64) - 1.0 {
        return Err(Error::invalid(format!(
            "Wishart degrees of freedom {dof} must exceed dimension minus one ({})",
            n as f64 - 1.0
        )));
    }
    let chol = symmetrized(scale.clone())
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Wishart scale".into()))?;
    let mut bartlett = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let chi = ChiSquared::new(dof - i as f64)
            .map_err(|e| Error::invalid(format!("chi-squared: {e}")))?;
        bartlett[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            bartlett[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = chol.l() * bartlett;
    Ok(symmetrized(&la * la.transpose()))
}

/// Draw from the inverse-Wishart distribution `IW(scale, dof)`, whose mean is
/// `scale / (dof - n - 1)`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    scale: &DMatrix<f64>,
    dof: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let scale = symmetrized(scale.clone());
    let precision = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("inverse-Wishart scale".into()))?
        .inverse();
    let w = sample_wishart(&precision, dof, rng)?;
    let inv = w
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Wishart draw".into()))?
        .inverse();
    Ok(symmetrized(inv))
}

/// Companion matrix of the lag polynomial `A_1, …, A_p` (each K×K).
pub fn companion(lags: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = lags.len();
    let k = lags.first().map_or(0, |a| a.nrows());
    let n = k * p;
    let mut c = DMatrix::zeros(n, n);
    for (i, a) in lags.iter().enumerate() {
        c.view_mut((0, i * k), (k, k)).copy_from(a);
    }
    for i in k..n {
        c[(i, i - k)] = 1.0;
    }
    c
}

/// Largest eigenvalue modulus. The Schur iteration is capped; when it does
/// not converge the result falls back to [`power_norm_radius`], which can
/// only overstate the radius.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    match Schur::try_new(m.clone(), f64::EPSILON, 200 * m.nrows()) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        None => power_norm_radius(m, 16),
    }
}

/// `‖M^(2^j)‖_F^(1/2^j)` by repeated squaring with renormalisation: an
/// upper bound on the spectral radius that tightens as `j` grows.
pub fn power_norm_radius(m: &DMatrix<f64>, squarings: u32) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let mut a = m / norm;
    let mut log_scale = norm.ln();
    let mut power = 1.0;
    for _ in 0..squarings {
        let sq = &a * &a;
        let n = sq.norm();
        if n == 0.0 {
            return 0.0;
        }
        log_scale = 2.0 * log_scale + n.ln();
        power *= 2.0;
        a = sq / n;
    }
    (log_scale / power).exp()
}

/// Block-diagonal matrix assembled from square blocks.
pub fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(b);
        at += b.nrows();
    }
    out
}
