//! Linear Gaussian state-space models: prediction-error likelihood, the
//! Carter–Kohn forward-filter backward-sampler, and the fixed-interval
//! smoother.
//!
//! ```text
//! y_t     = Z_t x_t + e_t,        e_t ~ N(0, H_t)
//! x_{t+1} = F x_t + η_t,          η_t ~ N(0, Q)
//! x_1     ~ N(a_1, P_1)
//! ```

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{sample_mvn, spd_solve, symmetrize, symmetrized};

#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    /// `Z_t`, one per observation.
    pub design: Vec<DMatrix<f64>>,
    /// `H_t`, one per observation.
    pub obs_cov: Vec<DMatrix<f64>>,
    pub transition: DMatrix<f64>,
    pub state_cov: DMatrix<f64>,
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
}

impl StateSpaceModel {
    /// Random-walk state with the given observation equations.
    pub fn random_walk(
        design: Vec<DMatrix<f64>>,
        obs_cov: Vec<DMatrix<f64>>,
        state_cov: DMatrix<f64>,
        init_mean: DVector<f64>,
        init_cov: DMatrix<f64>,
    ) -> Self {
        let n = init_mean.len();
        StateSpaceModel {
            design,
            obs_cov,
            transition: DMatrix::identity(n, n),
            state_cov,
            init_mean,
            init_cov,
        }
    }

    /// Scalar local-level model `y_t = x_t + e_t`, `x_{t+1} = x_t + η_t`.
    pub fn local_level(q: f64, r: f64, init_mean: f64, init_var: f64, nobs: usize) -> Self {
        StateSpaceModel::random_walk(
            vec![DMatrix::from_element(1, 1, 1.0); nobs],
            vec![DMatrix::from_element(1, 1, r); nobs],
            DMatrix::from_element(1, 1, q),
            DVector::from_element(1, init_mean),
            DMatrix::from_element(1, 1, init_var),
        )
    }

    fn has_identity_transition(&self) -> bool {
        let n = self.state_dim();
        self.transition == DMatrix::identity(n, n)
    }

    pub fn nobs(&self) -> usize {
        self.design.len()
    }

    pub fn state_dim(&self) -> usize {
        self.init_mean.len()
    }

    fn check(&self, observations: &[DVector<f64>]) -> Result<()> {
        let n = self.state_dim();
        let t = observations.len();
        if t == 0 {
            return Err(Error::invalid("state-space model needs observations"));
        }
        if self.design.len() != t || self.obs_cov.len() != t {
            return Err(Error::invalid(format!(
                "{t} observations but {} design and {} covariance matrices",
                self.design.len(),
                self.obs_cov.len()
            )));
        }
        if self.transition.shape() != (n, n)
            || self.state_cov.shape() != (n, n)
            || self.init_cov.shape() != (n, n)
        {
            return Err(Error::invalid("state matrices do not match the state dimension"));
        }
        for (i, y) in observations.iter().enumerate() {
            let m = y.len();
            if self.design[i].shape() != (m, n) || self.obs_cov[i].shape() != (m, m) {
                return Err(Error::invalid(format!("dimension mismatch at t = {i}")));
            }
        }
        Ok(())
    }
}

/// Output of the forward pass.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub log_likelihood: f64,
    /// `a_{t|t}`
    pub filtered_mean: Vec<DVector<f64>>,
    /// `P_{t|t}`
    pub filtered_cov: Vec<DMatrix<f64>>,
    /// `P_{t|t-1}`; entry 0 is `P_1`.
    pub predicted_cov: Vec<DMatrix<f64>>,
    /// `a_{t|t-1}`; entry 0 is `a_1`.
    pub predicted_mean: Vec<DVector<f64>>,
}

pub fn kalman_filter(model: &StateSpaceModel, observations: &[DVector<f64>]) -> Result<FilterOutput> {
    model.check(observations)?;
    let t_len = observations.len();
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut out = FilterOutput {
        log_likelihood: 0.0,
        filtered_mean: Vec::with_capacity(t_len),
        filtered_cov: Vec::with_capacity(t_len),
        predicted_cov: Vec::with_capacity(t_len),
        predicted_mean: Vec::with_capacity(t_len),
    };
    let identity = model.has_identity_transition();
    let mut a = model.init_mean.clone();
    let mut p = symmetrized(model.init_cov.clone());
    for (t, y) in observations.iter().enumerate() {
        let z = &model.design[t];
        let pz = &p * z.transpose();
        let mut f = z * &pz + &model.obs_cov[t];
        symmetrize(&mut f);
        let chol = f.cholesky().ok_or_else(|| {
            Error::NotPositiveDefinite(format!("innovation covariance at t = {t}"))
        })?;
        let v = y - z * &a;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let finv_v = chol.solve(&v);
        out.log_likelihood -= 0.5 * (y.len() as f64 * ln2pi + log_det + v.dot(&finv_v));
        // Gain K = P Z' F^{-1}
        let gain = chol.solve(&pz.transpose()).transpose();
        let a_filt = &a + &gain * v;
        let mut p_filt = &p - &gain * pz.transpose();
        symmetrize(&mut p_filt);

        out.predicted_mean.push(a);
        out.predicted_cov.push(p);
        if identity {
            a = a_filt.clone();
            p = &p_filt + &model.state_cov;
        } else {
            a = &model.transition * &a_filt;
            p = &model.transition * &p_filt * model.transition.transpose() + &model.state_cov;
        }
        symmetrize(&mut p);
        out.filtered_mean.push(a_filt);
        out.filtered_cov.push(p_filt);
    }
    Ok(out)
}

/// Exact Gaussian log-likelihood by the prediction-error decomposition.
pub fn kalman_loglik(model: &StateSpaceModel, observations: &[DVector<f64>]) -> Result<f64> {
    Ok(kalman_filter(model, observations)?.log_likelihood)
}

/// One draw of the full state path from `p(x_1..x_T | y_1..y_T)`.
pub fn carter_kohn_draw<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    observations: &[DVector<f64>],
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let filt = kalman_filter(model, observations)?;
    Ok(backward_sample(model, &filt, rng))
}

pub(crate) fn backward_sample<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    filt: &FilterOutput,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let t_len = filt.filtered_mean.len();
    let f = &model.transition;
    let identity = model.has_identity_transition();
    let mut path = vec![DVector::zeros(model.state_dim()); t_len];
    path[t_len - 1] = sample_mvn(&filt.filtered_mean[t_len - 1], &filt.filtered_cov[t_len - 1], rng);
    for t in (0..t_len - 1).rev() {
        let p = &filt.filtered_cov[t];
        let m = &filt.filtered_mean[t];
        // Predicted covariance of x_{t+1} given y_1..y_t.
        let (p_next, fp) = if identity {
            (p + &model.state_cov, p.clone())
        } else {
            (f * p * f.transpose() + &model.state_cov, f * p)
        };
        // G = P F' (P_next)^{-1}, computed as (P_next^{-1} F P)'.
        let gain = spd_solve(&p_next, &fp).transpose();
        let mean = m + &gain * (&path[t + 1] - f * m);
        // With F = I, P - G P = G Q, which is exactly zero when Q is.
        let mut cov = if identity {
            &gain * &model.state_cov
        } else {
            p - &gain * fp
        };
        symmetrize(&mut cov);
        path[t] = sample_mvn(&mean, &cov, rng);
    }
    path
}

/// Smoothed state means and covariances, one per period.
pub type SmoothedStates = (Vec<DVector<f64>>, Vec<DMatrix<f64>>);

/// Fixed-interval (Rauch–Tung–Striebel) smoothed means and covariances.
pub fn kalman_smoother(model: &StateSpaceModel, observations: &[DVector<f64>]) -> Result<SmoothedStates> {
    let filt = kalman_filter(model, observations)?;
    let t_len = observations.len();
    let f = &model.transition;
    let mut means = filt.filtered_mean.clone();
    let mut covs = filt.filtered_cov.clone();
    for t in (0..t_len - 1).rev() {
        let p = &filt.filtered_cov[t];
        let p_next = &filt.predicted_cov[t + 1];
        let fp = f * p;
        let gain = spd_solve(p_next, &fp).transpose();
        means[t] = &filt.filtered_mean[t] + &gain * (&means[t + 1] - &filt.predicted_mean[t + 1]);
        let mut c = p + &gain * (&covs[t + 1] - p_next) * gain.transpose();
        symmetrize(&mut c);
        covs[t] = c;
    }
    Ok((means, covs))
}
