//! Ingest, transform, select lags, sample, analyze, and write every output
//! with a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use rebound_core::analysis::{
    default_horizon, irf_at_date, irf_fan, rebound_table, CycleDate, CycleKind, ReboundTable,
    FAN_PERCENTILES,
};
use rebound_core::series::{
    ccf, deflate, hamilton_defaults, hamilton_filter, load_csv, log_transform, to_quarterly,
    Aggregation, CsvSchema, Dataset, Frequency, Period, TimeSeries,
};
use rebound_core::synthetic::{simulate_tvp, SyntheticSpec};
use rebound_core::tvp::io::save_posterior;
use rebound_core::tvp::{gibbs_run, init_priors, ProgressSink, TvpPosterior};
use rebound_core::var::{select_lag, ShockSpec, VarSpec};

use crate::config::{HamiltonChoice, LagChoice, PlotData, RunConfig, SeriesConfig};
use crate::describe::describe_cycles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Ingest,
    Transform,
    Describe,
    Ccf,
    LagSelect,
    Sample,
    Analyze,
    Write,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Estimation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Estimation => 3,
        }
    }

    fn data(stage: Stage, e: impl std::fmt::Display) -> Self {
        PipelineError {
            stage,
            kind: ErrorKind::Data,
            message: e.to_string(),
        }
    }

    fn estimation(stage: Stage, e: impl std::fmt::Display) -> Self {
        PipelineError {
            stage,
            kind: ErrorKind::Estimation,
            message: e.to_string(),
        }
    }

    pub fn config(e: impl std::fmt::Display) -> Self {
        PipelineError {
            stage: Stage::Config,
            kind: ErrorKind::Config,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl std::error::Error for PipelineError {}

type Result<T> = std::result::Result<T, PipelineError>;

/// Estimation-ready data plus the untransformed levels used for descriptive tables.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub model: Dataset,
    pub levels: Dataset,
    pub level_flags: Vec<bool>,
}

fn read_series(cfg: &RunConfig, s: &SeriesConfig, model_freq: Frequency) -> Result<TimeSeries> {
    let file_freq = match &s.frequency {
        Some(f) => f.parse().map_err(PipelineError::config)?,
        None => model_freq,
    };
    let schema = CsvSchema::new(&s.date_column, file_freq).column(&s.column, &s.role);
    let path = cfg.resolve(&s.file);
    let mut series = load_csv(&path, &schema)
        .map_err(|e| PipelineError::data(Stage::Ingest, e))?
        .remove(0);
    if file_freq != model_freq {
        if model_freq != Frequency::Quarterly {
            return Err(PipelineError::config(format!(
                "series {:?} is {file_freq} but the model is {model_freq}",
                s.role
            )));
        }
        let agg: Aggregation = s.aggregation.parse().map_err(PipelineError::config)?;
        series = to_quarterly(&series, agg).map_err(|e| PipelineError::data(Stage::Transform, e))?;
    }
    Ok(series)
}

/// Reads every configured series and applies its transforms in the order
/// aggregation, deflation, log, Hamilton filter.
pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let freq = cfg.frequency().map_err(PipelineError::config)?;
    if cfg.series.is_empty() {
        return Err(PipelineError::config("no [[series]] configured"));
    }
    let mut raw = BTreeMap::new();
    for s in &cfg.series {
        raw.insert(s.role.clone(), read_series(cfg, s, freq)?);
    }
    let transform = |e| PipelineError::data(Stage::Transform, e);
    let mut levels = Vec::new();
    let mut model = Vec::new();
    let mut flags = Vec::new();
    for role in &cfg.order {
        let s = cfg.series.iter().find(|s| &s.role == role).expect("validated role");
        let mut series = raw[role].clone();
        if let (Some(by), Some(base)) = (&s.deflate_by, &s.deflate_base) {
            let base = Period::parse(base, freq).map_err(PipelineError::config)?;
            series = deflate(&series, &raw[by], base).map_err(transform)?;
        }
        levels.push(series.clone().renamed(role.clone()));
        flags.push(s.level);
        if s.log {
            series = log_transform(&series).map_err(transform)?;
        }
        let hp = match s.hamilton {
            HamiltonChoice::Enabled(false) => None,
            HamiltonChoice::Enabled(true) => Some(hamilton_defaults(freq)),
            HamiltonChoice::Custom { h, p } => Some((h, p)),
        };
        if let Some((h, p)) = hp {
            series = hamilton_filter(&series, h, p).map_err(transform)?;
        }
        model.push(series.renamed(role.clone()));
    }
    Ok(Inputs {
        model: Dataset::aligned(&model).map_err(transform)?,
        levels: Dataset::aligned(&levels).map_err(transform)?,
        level_flags: flags,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: u64,
}

/// Writes files under one directory and keeps the inventory.
pub struct OutputWriter {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| {
            PipelineError::data(Stage::Write, format!("cannot create {}: {e}", dir.display()))
        })?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| {
            PipelineError::data(Stage::Write, format!("cannot write {}: {e}", path.display()))
        })?;
        self.files.push(OutputFile {
            path: name.to_string(),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: u64) {
        self.files.push(OutputFile {
            path: name.to_string(),
            bytes,
        });
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }
}

fn dataset_csv(d: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    d.write_csv(&mut buf).map_err(|e| PipelineError::data(Stage::Write, e))?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

/// Cross-correlations for adjacent pairs in the identification order.
pub fn ccf_table(data: &Dataset, max_lag: usize) -> Result<String> {
    let mut s = String::from("x,y,lag,coefficient,band\n");
    for j in 0..data.nvars().saturating_sub(1) {
        let (x, y) = (data.series(j), data.series(j + 1));
        let c = ccf(&x, &y, max_lag).map_err(|e| PipelineError::data(Stage::Ccf, e))?;
        for (lag, v) in &c.coefficients {
            writeln!(s, "{},{},{lag},{v:?},{:?}", x.name(), y.name(), c.band).unwrap();
        }
    }
    Ok(s)
}

fn default_ccf_lag(freq: Frequency) -> usize {
    match freq {
        Frequency::Monthly => 24,
        Frequency::Quarterly => 8,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSpan {
    pub data_start: String,
    pub data_end: String,
    pub estimation_start: Option<String>,
    pub estimation_end: Option<String>,
    pub observations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LagReport {
    pub selected: usize,
    pub method: String,
    pub aic: Option<usize>,
    pub bic: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplerReport {
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub retained: usize,
    pub sweeps: usize,
    pub failed_sweeps: usize,
    pub stationarity_rejections: usize,
    pub stationarity_rejection: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExclusionReport {
    pub date: String,
    pub kind: String,
    pub excluded_draws: usize,
    pub absent: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub status: String,
    pub failed_stage: Option<Stage>,
    pub message: Option<String>,
    pub config: RunConfig,
    pub seed: u64,
    pub sample: Option<SampleSpan>,
    pub lags: Option<LagReport>,
    pub sampler: Option<SamplerReport>,
    pub exclusions: Vec<ExclusionReport>,
    pub notes: Vec<String>,
    pub outputs: Vec<OutputFile>,
    pub timings_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(cfg: &RunConfig) -> Self {
        RunManifest {
            status: "running".into(),
            failed_stage: None,
            message: None,
            config: cfg.clone(),
            seed: cfg.seed,
            sample: None,
            lags: None,
            sampler: None,
            exclusions: Vec::new(),
            notes: Vec::new(),
            outputs: Vec::new(),
            timings_seconds: BTreeMap::new(),
        }
    }
}

pub const MANIFEST: &str = "manifest.json";

fn write_manifest(out: &OutputWriter, manifest: &mut RunManifest) -> Result<()> {
    manifest.outputs = out.files().to_vec();
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    let path = out.dir().join(MANIFEST);
    std::fs::write(&path, text).map_err(|e| {
        PipelineError::data(Stage::Write, format!("cannot write {}: {e}", path.display()))
    })
}

struct StderrProgress {
    step: usize,
}

impl ProgressSink for StderrProgress {
    fn report(&self, done: usize, total: usize) {
        if done.is_multiple_of(self.step) || done == total {
            eprintln!("sampling: {done}/{total} sweeps");
        }
    }
}

fn tag(kind: CycleKind) -> &'static str {
    match kind {
        CycleKind::Peak => "peaks",
        CycleKind::Trough => "troughs",
    }
}

fn analyze(
    cfg: &RunConfig,
    post: &TvpPosterior,
    kind: CycleKind,
    dates: &[Period],
    out: &mut OutputWriter,
    manifest: &mut RunManifest,
) -> Result<()> {
    let ppy = post.start.frequency().periods_per_year() as usize;
    let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(ppy));
    let shock = ShockSpec {
        variable: cfg.order.iter().position(|r| *r == cfg.shock.variable).expect("validated"),
        sign: cfg.shock.sign,
        size: cfg.shock.size,
    };
    let cycle: Vec<CycleDate> = dates.iter().map(|p| CycleDate { kind, period: *p }).collect();
    let table: ReboundTable = rebound_table(post, &cycle, shock, horizon)
        .map_err(|e| PipelineError::estimation(Stage::Analyze, format!("{} table: {e}", tag(kind))))?;
    for c in &table.columns {
        manifest.exclusions.push(ExclusionReport {
            date: c.date.period.to_string(),
            kind: kind.to_string(),
            excluded_draws: c.excluded,
            absent: c.cells.is_none(),
            note: c.note.clone(),
        });
    }
    let name = tag(kind);
    out.write(&format!("rebound_{name}.csv"), &table.to_csv())?;
    out.write(&format!("rebound_{name}.txt"), &table.to_text())?;
    out.write(&format!("rebound_density_{name}.csv"), &table.density_csv())?;
    for c in table.columns.iter().filter(|c| c.cells.is_some()) {
        let irf = irf_at_date(post, c.date.period, horizon, shock)
            .map_err(|e| PipelineError::estimation(Stage::Analyze, e))?;
        let file = format!("irf_{}_{}.csv", kind, c.date.period);
        match cfg.output.plot_data {
            PlotData::Percentiles => match irf_fan(&irf, &FAN_PERCENTILES) {
                Ok(fan) => out.write(&file, &fan.to_csv(&post.names))?,
                Err(e) => manifest.notes.push(format!("no fan for {}: {e}", c.date.period)),
            },
            PlotData::Draws => out.write(&file, &irf.to_csv(&post.names))?,
        }
    }
    Ok(())
}

/// The full pipeline with sampler progress on stderr.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunManifest> {
    let draws = cfg.mcmc_settings().draws;
    run_with_progress(cfg, out_dir, &StderrProgress { step: (draws / 20).max(1) })
}

/// The full pipeline. Outputs go to `out_dir`; the manifest is written on
/// success and on failure after the output directory exists.
pub fn run_with_progress(cfg: &RunConfig, out_dir: &Path, progress: &dyn ProgressSink) -> Result<RunManifest> {
    let mut out = OutputWriter::new(out_dir)?;
    let mut manifest = RunManifest::new(cfg);
    match run_stages(cfg, &mut out, &mut manifest, progress) {
        Ok(()) => {
            manifest.status = if manifest.exclusions.iter().any(|e| e.absent) {
                "complete-with-absent-columns".into()
            } else {
                "complete".into()
            };
            write_manifest(&out, &mut manifest)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.failed_stage = Some(e.stage);
            manifest.message = Some(e.message.clone());
            let _ = write_manifest(&out, &mut manifest);
            Err(e)
        }
    }
}

fn run_stages(
    cfg: &RunConfig,
    out: &mut OutputWriter,
    manifest: &mut RunManifest,
    progress: &dyn ProgressSink,
) -> Result<()> {
    let mut clock = Instant::now();
    let mut lap = |name: &str, manifest: &mut RunManifest| {
        manifest.timings_seconds.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let inputs = load_inputs(cfg)?;
    let data = &inputs.model;
    manifest.sample = Some(SampleSpan {
        data_start: data.start().to_string(),
        data_end: data.end().to_string(),
        estimation_start: None,
        estimation_end: None,
        observations: data.nobs(),
    });
    out.write("data.csv", &dataset_csv(data)?)?;
    lap("ingest", manifest);

    let peaks = cfg.peak_dates().map_err(PipelineError::config)?;
    let troughs = cfg.trough_dates().map_err(PipelineError::config)?;
    match describe_cycles(&inputs.levels, &peaks, &inputs.level_flags) {
        Ok(d) => {
            out.write("describe_moments.csv", &d.moments_csv())?;
            out.write("describe_growth.csv", &d.growth_csv())?;
            out.write("describe.txt", &d.to_text())?;
        }
        Err(e) => manifest.notes.push(format!("descriptive tables skipped: {e}")),
    }
    let max_lag = cfg.ccf_max_lag.unwrap_or_else(|| default_ccf_lag(data.frequency()));
    out.write("ccf.csv", &ccf_table(data, max_lag)?)?;
    lap("describe", manifest);

    let intercept = cfg.intercept.unwrap_or(true);
    let (lags, report) = match &cfg.lags {
        LagChoice::Fixed(p) => (
            *p,
            LagReport {
                selected: *p,
                method: "fixed".into(),
                aic: None,
                bic: None,
            },
        ),
        LagChoice::Named(_) => {
            let sel = select_lag(data, cfg.max_lags, intercept)
                .map_err(|e| PipelineError::estimation(Stage::LagSelect, e))?;
            let mut csv = String::from("lags,log_det,aic,bic\n");
            for c in &sel.table {
                writeln!(csv, "{},{:?},{:?},{:?}", c.lags, c.log_det, c.aic, c.bic).unwrap();
            }
            out.write("lag_selection.csv", &csv)?;
            let p = if cfg.lag_criterion == "aic" { sel.aic } else { sel.bic };
            (
                p,
                LagReport {
                    selected: p,
                    method: cfg.lag_criterion.clone(),
                    aic: Some(sel.aic),
                    bic: Some(sel.bic),
                },
            )
        }
    };
    manifest.lags = Some(report);
    lap("lag-select", manifest);

    let spec = VarSpec::new(data.nvars(), lags, intercept)
        .map_err(|e| PipelineError::estimation(Stage::LagSelect, e))?;
    let scales = cfg.prior_scales().map_err(PipelineError::config)?;
    let priors = init_priors(data, spec, cfg.training(), scales)
        .map_err(|e| PipelineError::estimation(Stage::Sample, e))?;
    let settings = cfg.mcmc_settings();
    let post = gibbs_run(data, spec, &priors, &settings, progress)
        .map_err(|e| PipelineError::estimation(Stage::Sample, e))?;
    if let Some(s) = manifest.sample.as_mut() {
        s.estimation_start = Some(post.start.to_string());
        s.estimation_end = Some(post.end().to_string());
    }
    manifest.sampler = Some(SamplerReport {
        draws: settings.draws,
        burn_in: settings.burn_in,
        thin: settings.thin,
        retained: post.draws.len(),
        sweeps: post.diagnostics.sweeps,
        failed_sweeps: post.diagnostics.failed_sweeps,
        stationarity_rejections: post.diagnostics.stationarity_rejections,
        stationarity_rejection: settings.stationarity_rejection,
    });
    if cfg.output.save_posterior {
        let bytes = save_posterior(&post, &out.dir().join("posterior.bin"))
            .map_err(|e| PipelineError::data(Stage::Write, e))?;
        out.record("posterior.bin", bytes);
    }
    lap("sample", manifest);

    analyze(cfg, &post, CycleKind::Peak, &peaks, out, manifest)?;
    analyze(cfg, &post, CycleKind::Trough, &troughs, out, manifest)?;
    lap("analyze", manifest);
    Ok(())
}

/// Descriptive tables only.
pub fn describe(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<OutputFile>> {
    let inputs = load_inputs(cfg)?;
    let peaks = cfg.peak_dates().map_err(PipelineError::config)?;
    let d = describe_cycles(&inputs.levels, &peaks, &inputs.level_flags)
        .map_err(|e| PipelineError::data(Stage::Describe, e))?;
    let mut out = OutputWriter::new(out_dir)?;
    out.write("describe_moments.csv", &d.moments_csv())?;
    out.write("describe_growth.csv", &d.growth_csv())?;
    out.write("describe.txt", &d.to_text())?;
    Ok(out.files().to_vec())
}

/// Cross-correlation diagnostics only.
pub fn cross_correlations(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<OutputFile>> {
    let inputs = load_inputs(cfg)?;
    let max_lag = cfg
        .ccf_max_lag
        .unwrap_or_else(|| default_ccf_lag(inputs.model.frequency()));
    let mut out = OutputWriter::new(out_dir)?;
    out.write("ccf.csv", &ccf_table(&inputs.model, max_lag)?)?;
    Ok(out.files().to_vec())
}

/// A stable three-variable VAR(2) used by `simulate`.
pub fn synthetic_spec(cfg: &RunConfig) -> SyntheticSpec {
    let var = VarSpec::new(3, 2, true).expect("valid spec");
    #[rustfmt::skip]
    let beta = vec![
        0.05, 0.50, 0.10, 0.00, 0.15, 0.00, 0.00,
        0.02, 0.20, 0.55, -0.10, 0.00, 0.10, 0.00,
        0.00, 0.00, 0.15, 0.60, 0.00, 0.00, 0.10,
    ];
    let sim = &cfg.simulate;
    let nb = var.n_coefficients();
    let mut spec = SyntheticSpec::constant(
        var,
        sim.nobs,
        DVector::from_vec(beta),
        DVector::from_vec(vec![0.3, -0.2, 0.4]),
        DVector::from_vec(vec![0.0, -0.5, 0.2]),
        cfg.seed,
    );
    spec.q = DMatrix::identity(nb, nb) * sim.coefficient_drift.powi(2);
    spec.w = DMatrix::identity(3, 3) * sim.volatility_drift.powi(2);
    spec
}

/// Writes a synthetic dataset named by the configured order, plus its truth paths.
pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<OutputFile>> {
    let start = cfg.simulate_start().map_err(PipelineError::config)?;
    let spec = synthetic_spec(cfg);
    let (data, truth) =
        simulate_tvp(&spec).map_err(|e| PipelineError::estimation(Stage::Sample, e))?;
    let data = Dataset::new(cfg.order.clone(), start, data.matrix().clone())
        .map_err(|e| PipelineError::data(Stage::Write, e))?;
    let mut out = OutputWriter::new(out_dir)?;
    out.write("synthetic.csv", &dataset_csv(&data)?)?;
    let mut s = String::from("date");
    for j in 0..truth.beta[0].len() {
        write!(s, ",beta_{j}").unwrap();
    }
    for j in 0..truth.alpha[0].len() {
        write!(s, ",alpha_{j}").unwrap();
    }
    for name in &cfg.order {
        write!(s, ",log_sigma_{name}").unwrap();
    }
    s.push('\n');
    for t in 0..truth.len() {
        write!(s, "{}", start.offset(t as i64)).unwrap();
        for v in truth.beta[t].iter().chain(&truth.alpha[t]).chain(&truth.log_sigma[t]) {
            write!(s, ",{v:?}").unwrap();
        }
        s.push('\n');
    }
    out.write("truth.csv", &s)?;
    Ok(out.files().to_vec())
}
