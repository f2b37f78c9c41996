//! Dated series, aligned datasets, CSV ingestion and the transforms applied
//! before estimation (logs, deflation, quarterly aggregation, Hamilton
//! trend-cycle filter, cross-correlation diagnostics).

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frequency {
    Monthly,
    Quarterly,
}

impl Frequency {
    pub fn periods_per_year(self) -> u32 {
        match self {
            Frequency::Monthly => 12,
            Frequency::Quarterly => 4,
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frequency::Monthly => "monthly",
            Frequency::Quarterly => "quarterly",
        })
    }
}

impl FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "monthly" | "m" => Ok(Frequency::Monthly),
            "quarterly" | "q" => Ok(Frequency::Quarterly),
            other => Err(Error::invalid(format!("unknown frequency {other:?}"))),
        }
    }
}

/// A calendar month or quarter.
///
/// Periods of the same frequency are totally ordered; comparing across
/// frequencies yields `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Period {
    year: i32,
    subperiod: u32,
    frequency: Frequency,
}

impl Period {
    pub fn new(year: i32, subperiod: u32, frequency: Frequency) -> Result<Self> {
        if subperiod == 0 || subperiod > frequency.periods_per_year() {
            return Err(Error::invalid(format!(
                "subperiod {subperiod} out of range for {frequency} data"
            )));
        }
        Ok(Period {
            year,
            subperiod,
            frequency,
        })
    }

    pub fn monthly(year: i32, month: u32) -> Result<Self> {
        Period::new(year, month, Frequency::Monthly)
    }

    pub fn quarterly(year: i32, quarter: u32) -> Result<Self> {
        Period::new(year, quarter, Frequency::Quarterly)
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn subperiod(&self) -> u32 {
        self.subperiod
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    /// Number of periods since year 0, subperiod 1.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * self.frequency.periods_per_year() as i64 + (self.subperiod as i64 - 1)
    }

    fn from_ordinal(ordinal: i64, frequency: Frequency) -> Self {
        let n = frequency.periods_per_year() as i64;
        Period {
            year: ordinal.div_euclid(n) as i32,
            subperiod: (ordinal.rem_euclid(n) + 1) as u32,
            frequency,
        }
    }

    pub fn offset(&self, periods: i64) -> Self {
        Period::from_ordinal(self.ordinal() + periods, self.frequency)
    }

    /// `other - self` in periods, if both share a frequency.
    pub fn periods_until(&self, other: &Period) -> Option<i64> {
        (self.frequency == other.frequency).then(|| other.ordinal() - self.ordinal())
    }

    /// The quarter containing a monthly period (quarterly periods map to themselves).
    pub fn to_quarter(&self) -> Period {
        match self.frequency {
            Frequency::Quarterly => *self,
            Frequency::Monthly => Period {
                year: self.year,
                subperiod: (self.subperiod - 1) / 3 + 1,
                frequency: Frequency::Quarterly,
            },
        }
    }

    /// Parses `YYYY-MM` for monthly or `YYYYQq` for quarterly data.
    pub fn parse(text: &str, frequency: Frequency) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::invalid(format!("cannot parse {text:?} as a {frequency} date"));
        let (year, sub) = match frequency {
            Frequency::Monthly => text.split_once('-').ok_or_else(bad)?,
            Frequency::Quarterly => text
                .split_once('Q')
                .or_else(|| text.split_once('q'))
                .ok_or_else(bad)?,
        };
        if year.len() != 4 || sub.is_empty() || sub.len() > 2 {
            return Err(bad());
        }
        let year: i32 = year.parse().map_err(|_| bad())?;
        let sub: u32 = sub.parse().map_err(|_| bad())?;
        Period::new(year, sub, frequency).map_err(|_| bad())
    }
}

impl PartialOrd for Period {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        (self.frequency == other.frequency).then(|| self.ordinal().cmp(&other.ordinal()))
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frequency {
            Frequency::Monthly => write!(f, "{:04}-{:02}", self.year, self.subperiod),
            Frequency::Quarterly => write!(f, "{:04}Q{}", self.year, self.subperiod),
        }
    }
}

/// One dated, gap-free scalar series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    unit: String,
    start: Period,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        start: Period,
        values: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::invalid(format!("series {name:?} is empty")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain {
                index: i,
                message: format!("series {name:?} has a non-finite value"),
            });
        }
        Ok(TimeSeries {
            name,
            unit: unit.into(),
            start,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn frequency(&self) -> Frequency {
        self.start.frequency()
    }

    pub fn start(&self) -> Period {
        self.start
    }

    pub fn end(&self) -> Period {
        self.start.offset(self.values.len() as i64 - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn period_at(&self, i: usize) -> Period {
        self.start.offset(i as i64)
    }

    pub fn index_of(&self, period: &Period) -> Option<usize> {
        let d = self.start.periods_until(period)?;
        (d >= 0 && (d as usize) < self.values.len()).then_some(d as usize)
    }

    pub fn value_at(&self, period: &Period) -> Option<f64> {
        self.index_of(period).map(|i| self.values[i])
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Restricts the series to `[from, to]` (inclusive).
    pub fn window(&self, from: Period, to: Period) -> Result<TimeSeries> {
        let a = self.index_of(&from).ok_or_else(|| {
            Error::invalid(format!("{from} outside the span of {}", self.name))
        })?;
        let b = self
            .index_of(&to)
            .ok_or_else(|| Error::invalid(format!("{to} outside the span of {}", self.name)))?;
        if b < a {
            return Err(Error::invalid(format!("empty window {from}..{to}")));
        }
        TimeSeries::new(
            self.name.clone(),
            self.unit.clone(),
            from,
            self.values[a..=b].to_vec(),
        )
    }
}

/// A T×K panel of aligned series in identification order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    start: Period,
    matrix: DMatrix<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, start: Period, matrix: DMatrix<f64>) -> Result<Self> {
        if names.len() != matrix.ncols() {
            return Err(Error::invalid(format!(
                "{} names for {} columns",
                names.len(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::invalid("dataset must be non-empty"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(Dataset {
            names,
            start,
            matrix,
        })
    }

    /// Stacks series that already share frequency, start and length.
    pub fn from_series(series: &[TimeSeries]) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::invalid("no series supplied"))?;
        for s in series {
            if s.start() != first.start() || s.len() != first.len() {
                return Err(Error::invalid(format!(
                    "series {:?} ({}..{}) is not aligned with {:?} ({}..{})",
                    s.name(),
                    s.start(),
                    s.end(),
                    first.name(),
                    first.start(),
                    first.end()
                )));
            }
        }
        let matrix = DMatrix::from_fn(first.len(), series.len(), |t, j| series[j].values()[t]);
        Dataset::new(
            series.iter().map(|s| s.name().to_string()).collect(),
            first.start(),
            matrix,
        )
    }

    /// Stacks series after trimming them to their common span.
    pub fn aligned(series: &[TimeSeries]) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::invalid("no series supplied"))?;
        let freq = first.frequency();
        if series.iter().any(|s| s.frequency() != freq) {
            return Err(Error::invalid("series have mixed frequencies"));
        }
        let from = series.iter().map(|s| s.start().ordinal()).max().unwrap();
        let to = series.iter().map(|s| s.end().ordinal()).min().unwrap();
        if to < from {
            return Err(Error::invalid("series do not overlap"));
        }
        let from = Period::from_ordinal(from, freq);
        let to = Period::from_ordinal(to, freq);
        let trimmed: Vec<_> = series
            .iter()
            .map(|s| s.window(from, to))
            .collect::<Result<_>>()?;
        Dataset::from_series(&trimmed)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn start(&self) -> Period {
        self.start
    }

    pub fn end(&self) -> Period {
        self.start.offset(self.nobs() as i64 - 1)
    }

    pub fn frequency(&self) -> Frequency {
        self.start.frequency()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn nobs(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn nvars(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.matrix.row(t).transpose()
    }

    pub fn index_of(&self, period: &Period) -> Option<usize> {
        let d = self.start.periods_until(period)?;
        (d >= 0 && (d as usize) < self.nobs()).then_some(d as usize)
    }

    pub fn series(&self, j: usize) -> TimeSeries {
        TimeSeries {
            name: self.names[j].clone(),
            unit: String::new(),
            start: self.start,
            values: self.matrix.column(j).iter().copied().collect(),
        }
    }

    /// Observations `from..from+len`.
    pub fn slice(&self, from: usize, len: usize) -> Result<Dataset> {
        if len == 0 || from + len > self.nobs() {
            return Err(Error::invalid(format!(
                "slice {from}..{} outside {} observations",
                from + len,
                self.nobs()
            )));
        }
        Dataset::new(
            self.names.clone(),
            self.start.offset(from as i64),
            self.matrix.rows(from, len).into_owned(),
        )
    }

    /// Writes the dataset in the schema `load_csv` reads: a `date` column
    /// followed by one column per variable.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for t in 0..self.nobs() {
            let mut rec = vec![self.start.offset(t as i64).to_string()];
            rec.extend(self.matrix.row(t).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("csv flush: {e}")))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Column roles for CSV ingestion.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub date_column: String,
    pub frequency: Frequency,
    /// `(csv column, series name)` pairs.
    pub columns: Vec<(String, String)>,
}

impl CsvSchema {
    pub fn new(date_column: &str, frequency: Frequency) -> Self {
        CsvSchema {
            date_column: date_column.to_string(),
            frequency,
            columns: Vec::new(),
        }
    }

    pub fn column(mut self, csv_column: &str, name: &str) -> Self {
        self.columns.push((csv_column.to_string(), name.to_string()));
        self
    }

    /// Maps every non-date column under its own name.
    pub fn all_columns(mut self, header: &[&str]) -> Self {
        for h in header {
            if *h != self.date_column {
                self.columns.push((h.to_string(), h.to_string()));
            }
        }
        self
    }
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<TimeSeries>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, schema)
}

/// Reads series from CSV text. Row numbers in errors count data rows from 1
/// (the header is row 0).
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Vec<TimeSeries>> {
    if schema.columns.is_empty() {
        return Err(Error::invalid("schema maps no value columns"));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Ingest {
            row: 0,
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Ingest {
            row: 0,
            message: format!("column {name:?} not found"),
        })
    };
    let date_idx = find(&schema.date_column)?;
    let value_idx: Vec<usize> = schema
        .columns
        .iter()
        .map(|(c, _)| find(c))
        .collect::<Result<_>>()?;

    let mut start: Option<Period> = None;
    let mut prev: Option<Period> = None;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); value_idx.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Ingest {
            row,
            message: e.to_string(),
        })?;
        let date_text = rec.get(date_idx).unwrap_or("");
        let date = Period::parse(date_text, schema.frequency).map_err(|_| Error::Ingest {
            row,
            message: format!("unparseable date {date_text:?}"),
        })?;
        if let Some(p) = prev {
            match p.periods_until(&date) {
                Some(1) => {}
                Some(d) if d <= 0 => {
                    return Err(Error::Ingest {
                        row,
                        message: format!("date {date} duplicates or precedes {p}"),
                    })
                }
                _ => {
                    return Err(Error::Ingest {
                        row,
                        message: format!("gap between {p} and {date}"),
                    })
                }
            }
        }
        start.get_or_insert(date);
        prev = Some(date);
        for (k, &j) in value_idx.iter().enumerate() {
            let cell = rec.get(j).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::Ingest {
                    row,
                    message: format!("missing value in column {:?}", schema.columns[k].0),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Ingest {
                row,
                message: format!("non-numeric value {cell:?} in column {:?}", schema.columns[k].0),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest {
                    row,
                    message: format!("non-finite value in column {:?}", schema.columns[k].0),
                });
            }
            columns[k].push(v);
        }
    }
    let start = start.ok_or(Error::Ingest {
        row: 1,
        message: "no data rows".into(),
    })?;
    schema
        .columns
        .iter()
        .zip(columns)
        .map(|((_, name), values)| TimeSeries::new(name.clone(), "", start, values))
        .collect()
}

/// Elementwise natural logarithm.
pub fn log_transform(s: &TimeSeries) -> Result<TimeSeries> {
    if let Some(i) = s.values().iter().position(|v| *v <= 0.0) {
        return Err(Error::Domain {
            index: i,
            message: format!(
                "log of nonpositive value {} in {:?} at {}",
                s.values()[i],
                s.name(),
                s.period_at(i)
            ),
        });
    }
    TimeSeries::new(
        format!("{}_log", s.name()),
        format!("log {}", s.unit()),
        s.start(),
        s.values().iter().map(|v| v.ln()).collect(),
    )
}

/// Converts a nominal series to constant prices of `base`:
/// `real_t = nominal_t · index_base / index_t` over the common span.
pub fn deflate(nominal: &TimeSeries, price_index: &TimeSeries, base: Period) -> Result<TimeSeries> {
    if nominal.frequency() != price_index.frequency() {
        return Err(Error::invalid("nominal series and price index differ in frequency"));
    }
    let index_base = price_index.value_at(&base).ok_or_else(|| {
        Error::invalid(format!(
            "base period {base} outside price index span {}..{}",
            price_index.start(),
            price_index.end()
        ))
    })?;
    let from = std::cmp::max(nominal.start().ordinal(), price_index.start().ordinal());
    let to = std::cmp::min(nominal.end().ordinal(), price_index.end().ordinal());
    if to < from {
        return Err(Error::invalid("nominal series and price index do not overlap"));
    }
    let start = Period::from_ordinal(from, nominal.frequency());
    let mut values = Vec::with_capacity((to - from + 1) as usize);
    for k in 0..=(to - from) {
        let p = start.offset(k);
        let idx = price_index.value_at(&p).unwrap();
        if idx <= 0.0 {
            return Err(Error::Domain {
                index: price_index.index_of(&p).unwrap(),
                message: format!("nonpositive price index at {p}"),
            });
        }
        values.push(nominal.value_at(&p).unwrap() * index_base / idx);
    }
    TimeSeries::new(
        format!("{}_real", nominal.name()),
        nominal.unit(),
        start,
        values,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Mean,
    Sum,
    Last,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(Aggregation::Mean),
            "sum" => Ok(Aggregation::Sum),
            "last" => Ok(Aggregation::Last),
            other => Err(Error::invalid(format!("unknown aggregation {other:?}"))),
        }
    }
}

/// Aggregates a monthly series to complete calendar quarters. Partial
/// quarters at either edge are dropped.
pub fn to_quarterly(s: &TimeSeries, method: Aggregation) -> Result<TimeSeries> {
    if s.frequency() != Frequency::Monthly {
        return Err(Error::invalid(format!("{:?} is not monthly", s.name())));
    }
    let lead = (3 - (s.start().subperiod() - 1) % 3) % 3;
    let lead = lead as usize;
    let quarters = s.len().saturating_sub(lead) / 3;
    if quarters == 0 {
        return Err(Error::invalid(format!(
            "{:?} does not cover a complete quarter",
            s.name()
        )));
    }
    let values = (0..quarters)
        .map(|q| {
            let chunk = &s.values()[lead + 3 * q..lead + 3 * q + 3];
            match method {
                Aggregation::Mean => chunk.iter().sum::<f64>() / 3.0,
                Aggregation::Sum => chunk.iter().sum::<f64>(),
                Aggregation::Last => chunk[2],
            }
        })
        .collect();
    TimeSeries::new(
        s.name(),
        s.unit(),
        s.start().offset(lead as i64).to_quarter(),
        values,
    )
}

/// Default `(h, p)` for the Hamilton filter: two years ahead on one year of lags.
pub fn hamilton_defaults(frequency: Frequency) -> (usize, usize) {
    match frequency {
        Frequency::Monthly => (24, 12),
        Frequency::Quarterly => (8, 4),
    }
}

/// Hamilton regression filter. The cycle is the residual from regressing
/// `s_t` on a constant and `s_{t-h}, …, s_{t-h-p+1}`; the output starts
/// `h + p - 1` periods after the input.
pub fn hamilton_filter(s: &TimeSeries, h: usize, p: usize) -> Result<TimeSeries> {
    if h == 0 || p == 0 {
        return Err(Error::invalid("Hamilton filter needs h >= 1 and p >= 1"));
    }
    let n = s.len();
    if n <= h + p {
        return Err(Error::invalid(format!(
            "series of length {n} too short for h = {h}, p = {p}"
        )));
    }
    let first = h + p - 1;
    let rows = n - first;
    if rows < p + 1 {
        return Err(Error::invalid(format!(
            "{rows} usable observations cannot identify {} coefficients",
            p + 1
        )));
    }
    let y = s.values();
    let x = DMatrix::from_fn(rows, p + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            y[first + r - h - (c - 1)]
        }
    });
    let target = DVector::from_fn(rows, |r, _| y[first + r]);
    let coef = least_squares(&x, &target).map_err(|_| {
        Error::Singular(format!(
            "Hamilton regressors of {:?} are collinear (constant or exactly linear lags)",
            s.name()
        ))
    })?;
    let fitted = &x * coef;
    TimeSeries::new(
        format!("{}_cycle", s.name()),
        s.unit(),
        s.period_at(first),
        (target - fitted).iter().copied().collect(),
    )
}

/// Least squares via Householder QR; errors on numerical rank deficiency.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let b = least_squares_multi(x, &DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?;
    Ok(b.column(0).into_owned())
}

pub(crate) fn least_squares_multi(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ncol = x.ncols();
    if x.nrows() < ncol {
        return Err(Error::Singular("fewer rows than regressors".into()));
    }
    // Column scaling keeps the rank test meaningful for badly scaled regressors.
    let scales: Vec<f64> = (0..ncol)
        .map(|j| {
            let n = x.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (j, s) in scales.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    let qr = xs.qr();
    let r = qr.r();
    let dmax = r.diagonal().amax();
    if dmax == 0.0 || r.diagonal().iter().any(|d| d.abs() <= 1e-10 * dmax) {
        return Err(Error::Singular("regressor matrix is rank deficient".into()));
    }
    let qty = qr.q().transpose() * y;
    let mut b = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    for (j, s) in scales.iter().enumerate() {
        b.row_mut(j).unscale_mut(*s);
    }
    Ok(b)
}

/// Sample cross-correlations with the ±2/√n reference band.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrelation {
    /// `(lag, coefficient)` for lags `-max_lag..=max_lag`.
    pub coefficients: Vec<(i64, f64)>,
    pub band: f64,
}

impl CrossCorrelation {
    pub fn at(&self, lag: i64) -> Option<f64> {
        self.coefficients
            .iter()
            .find(|(l, _)| *l == lag)
            .map(|(_, c)| *c)
    }
}

/// `coefficient(ℓ) = corr(x_t, y_{t+ℓ})` with the usual biased (1/n)
/// autocovariance normalisation. A peak at a positive lag means `x` leads `y`.
pub fn ccf(x: &TimeSeries, y: &TimeSeries, max_lag: usize) -> Result<CrossCorrelation> {
    if x.start() != y.start() || x.len() != y.len() {
        return Err(Error::invalid("ccf requires aligned series"));
    }
    let n = x.len();
    if max_lag >= n {
        return Err(Error::invalid(format!("max_lag {max_lag} >= length {n}")));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x.values()), mean(y.values()));
    let dx: Vec<f64> = x.values().iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.values().iter().map(|v| v - my).collect();
    let sx = dx.iter().map(|v| v * v).sum::<f64>();
    let sy = dy.iter().map(|v| v * v).sum::<f64>();
    if sx == 0.0 || sy == 0.0 {
        return Err(Error::invalid("ccf of a zero-variance series"));
    }
    let denom = (sx * sy).sqrt();
    let lag = max_lag as i64;
    let coefficients = (-lag..=lag)
        .map(|l| {
            let mut acc = 0.0;
            for t in 0..n as i64 {
                let s = t + l;
                if s >= 0 && s < n as i64 {
                    acc += dx[t as usize] * dy[s as usize];
                }
            }
            (l, acc / denom)
        })
        .collect();
    Ok(CrossCorrelation {
        coefficients,
        band: 2.0 / (n as f64).sqrt(),
    })
}
