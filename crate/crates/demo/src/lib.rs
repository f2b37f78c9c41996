//! Browser bindings. Every exported function takes and returns JSON so the
//! page needs no generated type glue beyond strings.
//!
//! * [`rebound_curve`]: impulse responses and the five-year rebound path of a
//!   constant three-variable VAR(1) whose coefficients come from sliders.
//! * [`hamilton_demo`]: a seeded random walk with drift split into the
//!   regression trend and cycle.
//! * [`volatility_demo`]: a short sampler run on synthetic data with drifting
//!   volatility, returning the posterior band next to the truth.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use rebound_core::analysis::{rebound_path, REBOUND_YEARS};
use rebound_core::linalg::standard_normal_vector;
use rebound_core::series::{hamilton_filter, Period, TimeSeries};
use rebound_core::synthetic::{simulate_tvp, SyntheticSpec};
use rebound_core::tvp::{gibbs_run, init_priors, McmcSettings, NoProgress, PriorScales};
use rebound_core::var::{cholesky_impact, irf_constant, ShockSpec, VarSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct CurveParams {
    /// Own persistence of energy use.
    pub energy_persistence: f64,
    /// Effect of last period's activity on energy use.
    pub activity_to_energy: f64,
    /// Effect of last period's energy use on activity.
    pub energy_to_activity: f64,
    /// Effect of last period's price on energy use.
    pub price_to_energy: f64,
    pub activity_persistence: f64,
    pub price_persistence: f64,
    pub periods_per_year: usize,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams {
            energy_persistence: 0.6,
            activity_to_energy: 0.2,
            energy_to_activity: 0.1,
            price_to_energy: -0.1,
            activity_persistence: 0.7,
            price_persistence: 0.8,
            periods_per_year: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveOutput {
    pub horizon: Vec<usize>,
    pub activity: Vec<f64>,
    pub energy: Vec<f64>,
    pub price: Vec<f64>,
    pub rebound: Option<[f64; REBOUND_YEARS]>,
    pub spectral_radius: f64,
    pub note: Option<String>,
}

pub fn curve(p: &CurveParams) -> Result<CurveOutput, String> {
    if !(1..=12).contains(&p.periods_per_year) {
        return Err("periods_per_year must be between 1 and 12".into());
    }
    #[rustfmt::skip]
    let a1 = DMatrix::from_row_slice(3, 3, &[
        p.activity_persistence, p.energy_to_activity, 0.0,
        p.activity_to_energy, p.energy_persistence, p.price_to_energy,
        0.0, 0.0, p.price_persistence,
    ]);
    let radius = rebound_core::linalg::spectral_radius(&a1);
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.0]);
    let impact = cholesky_impact(&cov).map_err(|e| e.to_string())?;
    let horizon = REBOUND_YEARS * p.periods_per_year;
    let irf = irf_constant(&[a1], &impact, horizon, ShockSpec::negative(1)).map_err(|e| e.to_string())?;
    let row = |i: usize| irf.row(i).iter().copied().collect::<Vec<f64>>();
    let energy = row(1);
    let (rebound, note) = match rebound_path(&energy, p.periods_per_year) {
        Ok(r) if radius < 1.0 => (Some(r), None),
        Ok(_) => (None, Some(format!("explosive VAR (spectral radius {radius:.3})"))),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(CurveOutput {
        horizon: (0..=horizon).collect(),
        activity: row(0),
        energy,
        price: row(2),
        rebound,
        spectral_radius: radius,
        note,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct HamiltonParams {
    pub nobs: usize,
    pub drift: f64,
    pub noise: f64,
    pub seed: u64,
    pub h: usize,
    pub p: usize,
}

impl Default for HamiltonParams {
    fn default() -> Self {
        HamiltonParams {
            nobs: 240,
            drift: 0.005,
            noise: 0.02,
            seed: 1,
            h: 8,
            p: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HamiltonOutput {
    pub series: Vec<f64>,
    /// Index of the first period with a cycle value.
    pub offset: usize,
    pub trend: Vec<f64>,
    pub cycle: Vec<f64>,
}

pub fn hamilton(p: &HamiltonParams) -> Result<HamiltonOutput, String> {
    if p.nobs > 5000 {
        return Err("at most 5000 observations".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let shocks = standard_normal_vector(p.nobs, &mut rng);
    let mut level = 0.0;
    let series: Vec<f64> = shocks
        .iter()
        .map(|e| {
            level += p.drift + p.noise * e;
            level
        })
        .collect();
    let ts = TimeSeries::new("x", "", Period::quarterly(1960, 1).unwrap(), series.clone()).map_err(|e| e.to_string())?;
    let cycle = hamilton_filter(&ts, p.h, p.p).map_err(|e| e.to_string())?;
    let offset = p.h + p.p - 1;
    let cycle = cycle.values().to_vec();
    let trend = cycle.iter().enumerate().map(|(i, c)| series[offset + i] - c).collect();
    Ok(HamiltonOutput {
        series,
        offset,
        trend,
        cycle,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct VolatilityParams {
    pub nobs: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub volatility_drift: f64,
    pub seed: u64,
}

impl Default for VolatilityParams {
    fn default() -> Self {
        VolatilityParams {
            nobs: 160,
            sweeps: 400,
            burn_in: 100,
            volatility_drift: 0.08,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VolatilityOutput {
    /// Data index of the first estimated period.
    pub offset: usize,
    pub truth: Vec<f64>,
    pub p17: Vec<f64>,
    pub p50: Vec<f64>,
    pub p83: Vec<f64>,
    pub retained: usize,
}

const VOL_TRAINING: usize = 30;

/// Energy-equation volatility `exp σ_t` under a VAR(1) with drifting
/// log-volatility and constant coefficients.
pub fn volatility(p: &VolatilityParams) -> Result<VolatilityOutput, String> {
    if p.nobs < VOL_TRAINING + 20 || p.nobs > 400 {
        return Err(format!("nobs must lie in {}..=400", VOL_TRAINING + 20));
    }
    if p.sweeps > 5000 || p.sweeps <= p.burn_in {
        return Err("need burn_in < sweeps <= 5000".into());
    }
    let var = VarSpec::new(3, 1, true).map_err(|e| e.to_string())?;
    #[rustfmt::skip]
    let beta = DVector::from_vec(vec![
        0.0, 0.6, 0.1, 0.0,
        0.0, 0.2, 0.5, -0.1,
        0.0, 0.0, 0.0, 0.7,
    ]);
    let mut spec = SyntheticSpec::constant(
        var,
        p.nobs,
        beta,
        DVector::from_vec(vec![0.2, 0.0, 0.1]),
        DVector::from_vec(vec![0.0, 0.0, 0.0]),
        p.seed,
    );
    spec.w = DMatrix::identity(3, 3) * p.volatility_drift.powi(2);
    let (data, truth) = simulate_tvp(&spec).map_err(|e| e.to_string())?;
    let priors = init_priors(&data, var, VOL_TRAINING, PriorScales::default()).map_err(|e| e.to_string())?;
    let settings = McmcSettings {
        draws: p.sweeps,
        burn_in: p.burn_in,
        thin: 1,
        ..McmcSettings::desk(p.seed)
    };
    let post = gibbs_run(&data, var, &priors, &settings, &NoProgress).map_err(|e| e.to_string())?;
    let mut bands = [Vec::new(), Vec::new(), Vec::new()];
    for t in 0..post.nobs {
        let mut v: Vec<f64> = post.draws.iter().map(|d| d.log_sigma[(t, 1)].exp()).collect();
        v.sort_by(f64::total_cmp);
        for (band, level) in bands.iter_mut().zip([17.0, 50.0, 83.0]) {
            band.push(rebound_core::analysis::percentile_sorted(&v, level));
        }
    }
    let [p17, p50, p83] = bands;
    Ok(VolatilityOutput {
        offset: VOL_TRAINING,
        truth: truth.log_sigma.iter().map(|s| s[1].exp()).collect(),
        p17,
        p50,
        p83,
        retained: post.draws.len(),
    })
}

fn call<P, O>(json: &str, f: impl Fn(&P) -> Result<O, String>) -> Result<String, String>
where
    P: for<'de> Deserialize<'de>,
    O: Serialize,
{
    let params: P = serde_json::from_str(if json.trim().is_empty() { "{}" } else { json })
        .map_err(|e| format!("bad parameters: {e}"))?;
    let out = f(&params)?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn rebound_curve(json: &str) -> Result<String, JsValue> {
    call(json, curve).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn hamilton_demo(json: &str) -> Result<String, JsValue> {
    call(json, hamilton).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn volatility_demo(json: &str) -> Result<String, JsValue> {
    call(json, volatility).map_err(|e| JsValue::from_str(&e))
}
