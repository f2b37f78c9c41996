use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::steps::{
    draw_alpha, draw_beta, draw_hyper, draw_sigma, orthogonalize, Hyperparameters,
    StationarityRule, TvpData,
};
use super::{McmcSettings, PosteriorDraw, SamplerDiagnostics, TvpPosterior, TvpPriors};
use crate::error::{Error, Result};
use crate::series::Dataset;
use crate::var::VarSpec;

/// Consecutive failed sweeps tolerated before the run is abandoned.
pub const MAX_CONSECUTIVE_FAILURES: usize = 10;

/// Receives `(completed sweeps, total sweeps)` as the chain advances.
pub trait ProgressSink: Sync {
    fn report(&self, done: usize, total: usize);
}

pub struct NoProgress;

impl ProgressSink for NoProgress {
    fn report(&self, _: usize, _: usize) {}
}

impl<F: Fn(usize, usize) + Sync> ProgressSink for F {
    fn report(&self, done: usize, total: usize) {
        self(done, total)
    }
}

#[derive(Clone)]
struct State {
    beta: Vec<DVector<f64>>,
    alpha: Vec<DVector<f64>>,
    log_sigma: Vec<DVector<f64>>,
    hyper: Hyperparameters,
}

impl State {
    fn is_finite(&self) -> bool {
        let paths = self.beta.iter().chain(&self.alpha).chain(&self.log_sigma);
        let mut covs = std::iter::once(&self.hyper.q)
            .chain(&self.hyper.s)
            .chain(std::iter::once(&self.hyper.w));
        paths.flat_map(|v| v.iter()).all(|x| x.is_finite())
            && covs.all(|m| m.iter().all(|x| x.is_finite()))
    }

    fn to_draw(&self) -> PosteriorDraw {
        let stack = |path: &[DVector<f64>]| {
            let n = path.first().map_or(0, |v| v.len());
            DMatrix::from_fn(path.len(), n, |t, j| path[t][j])
        };
        PosteriorDraw {
            beta: stack(&self.beta),
            alpha: stack(&self.alpha),
            log_sigma: stack(&self.log_sigma),
            q: self.hyper.q.clone(),
            s: self.hyper.s.clone(),
            w: self.hyper.w.clone(),
        }
    }
}

fn sweep(
    data: &TvpData,
    priors: &TvpPriors,
    rule: StationarityRule,
    state: &State,
    rng: &mut ChaCha8Rng,
) -> Result<(State, usize)> {
    let (beta, rejections) = draw_beta(
        data,
        &state.alpha,
        &state.log_sigma,
        &state.hyper.q,
        priors,
        rule,
        rng,
    )?;
    let residuals = data.residuals(&beta);
    let alpha = draw_alpha(&residuals, &state.log_sigma, &state.hyper.s, priors, rng)?;
    let orthogonal = orthogonalize(&residuals, &alpha);
    let log_sigma = draw_sigma(&orthogonal, &state.log_sigma, &state.hyper.w, priors, rng)?.log_sigma;
    let hyper = draw_hyper(&beta, &alpha, &log_sigma, priors, rng)?;
    Ok((
        State {
            beta,
            alpha,
            log_sigma,
            hyper,
        },
        rejections,
    ))
}

/// Runs the sampler on the observations after the training window.
///
/// A sweep that fails (an exhausted stationarity budget or a covariance that
/// is not positive definite) is discarded and repeated with fresh random
/// numbers. After [`MAX_CONSECUTIVE_FAILURES`] failures in a row the run
/// stops with [`Error::Sampler`]. A non-finite state stops it immediately.
pub fn gibbs_run(
    data: &Dataset,
    spec: VarSpec,
    priors: &TvpPriors,
    settings: &McmcSettings,
    progress: &dyn ProgressSink,
) -> Result<TvpPosterior> {
    settings.validate()?;
    priors.validate(&spec)?;
    let training = priors.training;
    if data.nobs() <= training + spec.lags + 10 {
        return Err(Error::invalid(format!(
            "{} observations leave too few after a training window of {training}",
            data.nobs()
        )));
    }
    let tvp = TvpData::new(data, spec, training)?;
    let t_len = tvp.nobs();
    let rule = StationarityRule {
        enabled: settings.stationarity_rejection,
        max_rejections: settings.max_rejections,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut state = State {
        beta: vec![priors.beta_mean.clone(); t_len],
        alpha: vec![priors.alpha_mean.clone(); t_len],
        log_sigma: vec![priors.log_sigma_mean.clone(); t_len],
        hyper: Hyperparameters::initial(priors),
    };
    let mut diagnostics = SamplerDiagnostics::default();
    let mut draws = Vec::with_capacity(settings.retained());
    let mut consecutive = 0;
    let mut done = 0;
    while done < settings.draws {
        diagnostics.sweeps += 1;
        match sweep(&tvp, priors, rule, &state, &mut rng) {
            Ok((next, rejections)) => {
                if !next.is_finite() {
                    return Err(Error::Sampler(format!(
                        "non-finite state after sweep {}",
                        done + 1
                    )));
                }
                diagnostics.stationarity_rejections += rejections;
                consecutive = 0;
                state = next;
                done += 1;
                if done > settings.burn_in && (done - settings.burn_in).is_multiple_of(settings.thin) {
                    draws.push(state.to_draw());
                }
                progress.report(done, settings.draws);
            }
            Err(e @ (Error::Sampler(_) | Error::NotPositiveDefinite(_) | Error::Singular(_))) => {
                diagnostics.failed_sweeps += 1;
                consecutive += 1;
                if consecutive >= MAX_CONSECUTIVE_FAILURES {
                    return Err(Error::Sampler(format!(
                        "{consecutive} consecutive failed sweeps, last: {e}"
                    )));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TvpPosterior {
        spec,
        names: tvp.names,
        start: tvp.start,
        nobs: t_len,
        draws,
        diagnostics,
    })
}
