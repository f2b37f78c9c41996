//! Run configuration, read from a single TOML file.
//!
//! ```toml
//! frequency = "monthly"            # model frequency
//! order = ["activity", "energy", "price"]
//! lags = "auto"                    # or an integer
//! seed = 20250101
//! profile = "full"                 # or "desk"
//!
//! [[series]]
//! role = "activity"
//! file = "data/bbk.csv"
//! column = "bbk"
//!
//! [[series]]
//! role = "energy"
//! file = "data/eia.csv"
//! column = "total"
//! log = true
//! hamilton = true
//! level = true
//! ```
//!
//! Relative file paths are resolved against the directory holding the
//! configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rebound_core::series::{Aggregation, Frequency, Period};
use rebound_core::tvp::{McmcSettings, PriorScales, DEFAULT_TRAINING};

use crate::dates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Full,
    Desk,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Profile::Full),
            "desk" => Ok(Profile::Desk),
            other => Err(format!("unknown profile {other:?} (expected full or desk)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LagChoice {
    Fixed(usize),
    Named(String),
}

impl Default for LagChoice {
    fn default() -> Self {
        LagChoice::Named("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HamiltonChoice {
    Enabled(bool),
    Custom { h: usize, p: usize },
}

impl Default for HamiltonChoice {
    fn default() -> Self {
        HamiltonChoice::Enabled(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    /// `activity`, `energy`, `price`, or any other label for auxiliary series.
    pub role: String,
    pub file: PathBuf,
    pub column: String,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    /// Frequency of the file, when it differs from the model frequency.
    pub frequency: Option<String>,
    #[serde(default = "default_aggregation")]
    pub aggregation: String,
    /// Role of a price index used to deflate this series.
    pub deflate_by: Option<String>,
    pub deflate_base: Option<String>,
    #[serde(default)]
    pub log: bool,
    #[serde(default)]
    pub hamilton: HamiltonChoice,
    /// Level series get growth-rate columns in the descriptive tables.
    #[serde(default)]
    pub level: bool,
}

fn default_date_column() -> String {
    "date".into()
}

fn default_aggregation() -> String {
    "mean".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockConfig {
    #[serde(default = "default_shock_variable")]
    pub variable: String,
    #[serde(default = "default_sign")]
    pub sign: f64,
    #[serde(default = "default_size")]
    pub size: f64,
}

fn default_shock_variable() -> String {
    "energy".into()
}

fn default_sign() -> f64 {
    -1.0
}

fn default_size() -> f64 {
    1.0
}

impl Default for ShockConfig {
    fn default() -> Self {
        ShockConfig {
            variable: default_shock_variable(),
            sign: default_sign(),
            size: default_size(),
        }
    }
}

/// A named built-in date set or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DateList {
    Named(String),
    Explicit(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatesConfig {
    pub peaks: Option<DateList>,
    pub troughs: Option<DateList>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub training: Option<usize>,
    pub k_q: Option<f64>,
    pub k_s: Option<f64>,
    pub k_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub draws: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub stationarity_rejection: Option<bool>,
    pub max_rejections: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotData {
    #[default]
    Percentiles,
    Draws,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub plot_data: PlotData,
    #[serde(default)]
    pub save_posterior: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            plot_data: PlotData::Percentiles,
            save_posterior: false,
        }
    }
}

/// Parameters of the synthetic generator used by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_sim_nobs")]
    pub nobs: usize,
    /// First period; defaults to the first period of 2000.
    pub start: Option<String>,
    /// Standard deviation of the log-volatility increments; 0 gives constant parameters.
    #[serde(default)]
    pub volatility_drift: f64,
    /// Standard deviation of the coefficient increments.
    #[serde(default)]
    pub coefficient_drift: f64,
}

fn default_sim_nobs() -> usize {
    200
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            nobs: default_sim_nobs(),
            start: None,
            volatility_drift: 0.0,
            coefficient_drift: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub frequency: String,
    #[serde(default = "default_order")]
    pub order: Vec<String>,
    #[serde(default)]
    pub series: Vec<SeriesConfig>,
    #[serde(default)]
    pub lags: LagChoice,
    #[serde(default = "default_max_lags")]
    pub max_lags: usize,
    #[serde(default = "default_criterion")]
    pub lag_criterion: String,
    #[serde(default)]
    pub intercept: Option<bool>,
    #[serde(default)]
    pub shock: ShockConfig,
    pub horizon: Option<usize>,
    #[serde(default)]
    pub dates: DatesConfig,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default)]
    pub seed: u64,
    pub ccf_max_lag: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    /// Directory relative paths are resolved against; set when loading.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_order() -> Vec<String> {
    vec!["activity".into(), "energy".into(), "price".into()]
}

fn default_max_lags() -> usize {
    6
}

fn default_criterion() -> String {
    "bic".into()
}

fn default_profile() -> Profile {
    Profile::Full
}

/// A problem with the configuration itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_toml(&text, base)
    }

    pub fn frequency(&self) -> Result<Frequency, ConfigError> {
        self.frequency.parse().map_err(|e: rebound_core::Error| bad(e.to_string()))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let freq = self.frequency()?;
        if self.order.len() != 3 {
            return Err(bad(format!(
                "order must list exactly three roles, got {}",
                self.order.len()
            )));
        }
        let mut seen = BTreeMap::new();
        for s in &self.series {
            if seen.insert(s.role.as_str(), ()).is_some() {
                return Err(bad(format!("role {:?} defined twice", s.role)));
            }
            if let Some(f) = &s.frequency {
                f.parse::<Frequency>().map_err(|e| bad(e.to_string()))?;
            }
            s.aggregation
                .parse::<Aggregation>()
                .map_err(|e| bad(format!("series {:?}: {e}", s.role)))?;
            match (&s.deflate_by, &s.deflate_base) {
                (Some(_), None) | (None, Some(_)) => {
                    return Err(bad(format!(
                        "series {:?}: deflate_by and deflate_base go together",
                        s.role
                    )))
                }
                (Some(by), Some(base)) => {
                    if !self.series.iter().any(|o| &o.role == by) {
                        return Err(bad(format!("series {:?} deflated by unknown role {by:?}", s.role)));
                    }
                    Period::parse(base, freq).map_err(|e| bad(e.to_string()))?;
                }
                (None, None) => {}
            }
        }
        for role in &self.order {
            if !self.series.is_empty() && !seen.contains_key(role.as_str()) {
                return Err(bad(format!("no series provides role {role:?}")));
            }
        }
        if !self.order.contains(&self.shock.variable) {
            return Err(bad(format!("shock variable {:?} is not in the order", self.shock.variable)));
        }
        if self.shock.size.is_nan() || self.shock.size <= 0.0 || self.shock.sign.abs() != 1.0 {
            return Err(bad("shock size must be positive and sign ±1"));
        }
        match &self.lags {
            LagChoice::Fixed(0) => return Err(bad("lags must be at least 1")),
            LagChoice::Named(s) if s != "auto" => {
                return Err(bad(format!("lags must be an integer or \"auto\", got {s:?}")))
            }
            _ => {}
        }
        if !matches!(self.lag_criterion.as_str(), "aic" | "bic") {
            return Err(bad("lag_criterion must be aic or bic"));
        }
        if self.max_lags == 0 {
            return Err(bad("max_lags must be at least 1"));
        }
        self.mcmc_settings().validate().map_err(|e| bad(e.to_string()))?;
        self.prior_scales()?;
        self.peak_dates()?;
        self.trough_dates()?;
        self.simulate_start()?;
        Ok(())
    }

    pub fn mcmc_settings(&self) -> McmcSettings {
        let base = match self.profile {
            Profile::Full => McmcSettings::full(self.seed),
            Profile::Desk => McmcSettings::desk(self.seed),
        };
        let m = &self.mcmc;
        McmcSettings {
            draws: m.draws.unwrap_or(base.draws),
            burn_in: m.burn_in.unwrap_or(base.burn_in),
            thin: m.thin.unwrap_or(base.thin),
            seed: self.seed,
            stationarity_rejection: m.stationarity_rejection.unwrap_or(base.stationarity_rejection),
            max_rejections: m.max_rejections.unwrap_or(base.max_rejections),
        }
    }

    pub fn prior_scales(&self) -> Result<PriorScales, ConfigError> {
        let d = PriorScales::default();
        let s = PriorScales {
            k_q: self.priors.k_q.unwrap_or(d.k_q),
            k_s: self.priors.k_s.unwrap_or(d.k_s),
            k_w: self.priors.k_w.unwrap_or(d.k_w),
        };
        if !(s.k_q > 0.0 && s.k_s > 0.0 && s.k_w > 0.0) {
            return Err(bad("prior scales must be positive"));
        }
        Ok(s)
    }

    pub fn simulate_start(&self) -> Result<Period, ConfigError> {
        let freq = self.frequency()?;
        match &self.simulate.start {
            Some(s) => Period::parse(s, freq).map_err(|e| bad(e.to_string())),
            None => Period::new(2000, 1, freq).map_err(|e| bad(e.to_string())),
        }
    }

    pub fn training(&self) -> usize {
        self.priors.training.unwrap_or(DEFAULT_TRAINING)
    }

    fn date_list(&self, list: Option<&DateList>, fallback: &str) -> Result<Vec<Period>, ConfigError> {
        let freq = self.frequency()?;
        match list {
            None => dates::builtin(&format!("{fallback}-{freq}")).ok_or_else(|| bad("missing date set")),
            Some(DateList::Named(name)) => {
                let set = dates::builtin(name)
                    .ok_or_else(|| bad(format!("unknown date set {name:?}; known: {}", dates::NAMES.join(", "))))?;
                if set.iter().any(|p| p.frequency() != freq) {
                    return Err(bad(format!("date set {name:?} does not match {freq} data")));
                }
                Ok(set)
            }
            Some(DateList::Explicit(items)) => items
                .iter()
                .map(|s| Period::parse(s, freq).map_err(|e| bad(e.to_string())))
                .collect(),
        }
    }

    pub fn peak_dates(&self) -> Result<Vec<Period>, ConfigError> {
        self.date_list(self.dates.peaks.as_ref(), "paper-peaks")
    }

    pub fn trough_dates(&self) -> Result<Vec<Period>, ConfigError> {
        self.date_list(self.dates.troughs.as_ref(), "paper-troughs")
    }
}
