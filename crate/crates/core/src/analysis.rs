//! Date-specific impulse responses from posterior draws, rebound-effect
//! paths and their percentile summaries.

use std::fmt::{self, Write as _};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::series::Period;
use crate::tvp::TvpPosterior;
use crate::var::{propagate, ShockSpec};

/// Rebound is reported at years `1..=REBOUND_YEARS`.
pub const REBOUND_YEARS: usize = 5;
/// A summary is refused when more than this share of draws is excluded.
pub const MAX_EXCLUDED_SHARE: f64 = 0.10;
pub const TABLE_PERCENTILES: [f64; 3] = [10.0, 50.0, 90.0];
pub const FAN_PERCENTILES: [f64; 3] = [17.0, 50.0, 83.0];

/// Five years of periods at the given frequency: 60 months or 20 quarters.
pub fn default_horizon(periods_per_year: usize) -> usize {
    REBOUND_YEARS * periods_per_year
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CycleKind {
    Peak,
    Trough,
}

impl fmt::Display for CycleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CycleKind::Peak => "peak",
            CycleKind::Trough => "trough",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CycleDate {
    pub kind: CycleKind,
    pub period: Period,
}

impl CycleDate {
    pub fn peak(period: Period) -> Self {
        CycleDate {
            kind: CycleKind::Peak,
            period,
        }
    }

    pub fn trough(period: Period) -> Self {
        CycleDate {
            kind: CycleKind::Trough,
            period,
        }
    }
}

/// Impulse responses at one date, one K×(H+1) matrix per usable draw.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfPosterior {
    pub date: Period,
    pub horizon: usize,
    pub shock: ShockSpec,
    pub responses: Vec<DMatrix<f64>>,
    /// Draws whose propagation produced non-finite values.
    pub excluded: usize,
}

impl IrfPosterior {
    pub fn total_draws(&self) -> usize {
        self.responses.len() + self.excluded
    }

    pub fn excluded_share(&self) -> f64 {
        match self.total_draws() {
            0 => 1.0,
            n => self.excluded as f64 / n as f64,
        }
    }
}

/// Responses to `shock` with every draw's parameters frozen at `date`. The
/// shock is one of that draw's own date-`t` structural standard deviations.
pub fn irf_at_date(
    post: &TvpPosterior,
    date: Period,
    horizon: usize,
    shock: ShockSpec,
) -> Result<IrfPosterior> {
    let k = post.spec.nvars;
    if shock.variable >= k {
        return Err(Error::invalid(format!(
            "shock variable {} outside 0..{k}",
            shock.variable
        )));
    }
    if shock.size.is_nan() || shock.size <= 0.0 {
        return Err(Error::invalid("shock size must be positive"));
    }
    let t = post.index_of(&date).ok_or_else(|| {
        Error::invalid(format!(
            "date {date} outside the estimation sample {}..{}",
            post.start,
            post.end()
        ))
    })?;
    let mut responses = Vec::with_capacity(post.draws.len());
    let mut excluded = 0;
    for draw in &post.draws {
        let coefs = draw.coefficients(&post.spec, t);
        let column = draw.impact(t).column(shock.variable) * shock.scale();
        let r = propagate(&coefs.lags, &column, horizon);
        if r.iter().all(|v| v.is_finite()) {
            responses.push(r);
        } else {
            excluded += 1;
        }
    }
    Ok(IrfPosterior {
        date,
        horizon,
        shock,
        responses,
        excluded,
    })
}

/// `(1 - x_i / x_0) · 100` at horizons `i · periods_per_year`, `i = 1..=5`.
///
/// Fails with [`Error::Domain`] when `x_0` is negligible relative to the
/// path or a needed value is not finite.
pub fn rebound_path(path: &[f64], periods_per_year: usize) -> Result<[f64; REBOUND_YEARS]> {
    let needed = default_horizon(periods_per_year);
    if periods_per_year == 0 || path.len() <= needed {
        return Err(Error::invalid(format!(
            "response path of length {} does not reach horizon {needed}",
            path.len()
        )));
    }
    let x0 = path[0];
    let peak = path.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !x0.is_finite() || x0.abs() <= 1e-12 * peak || x0 == 0.0 {
        return Err(Error::Domain {
            index: 0,
            message: "immediate response is numerically zero".into(),
        });
    }
    let mut out = [0.0; REBOUND_YEARS];
    for (i, slot) in out.iter_mut().enumerate() {
        let h = (i + 1) * periods_per_year;
        *slot = (1.0 - path[h] / x0) * 100.0;
        if !slot.is_finite() {
            return Err(Error::Domain {
                index: h,
                message: "non-finite response".into(),
            });
        }
    }
    Ok(out)
}

/// Percentile of sorted data with linear interpolation between order
/// statistics at position `(n - 1) · p / 100`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentiles of `values` at each requested level (in percent).
pub fn summarize(values: &[f64], levels: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::invalid(format!(
            "at least two values needed for a summary, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("summary input contains non-finite values"));
    }
    if let Some(p) = levels.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(Error::invalid(format!("percentile level {p} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(levels.iter().map(|p| percentile_sorted(&sorted, *p)).collect())
}

/// Percentile bands of every response over horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfFan {
    pub date: Period,
    pub levels: Vec<f64>,
    /// One K×(H+1) matrix per level.
    pub bands: Vec<DMatrix<f64>>,
    pub draws: usize,
    pub excluded: usize,
}

pub fn irf_fan(irf: &IrfPosterior, levels: &[f64]) -> Result<IrfFan> {
    if irf.excluded_share() > MAX_EXCLUDED_SHARE {
        return Err(Error::Sampler(format!(
            "{} of {} draws at {} produced non-finite responses",
            irf.excluded,
            irf.total_draws(),
            irf.date
        )));
    }
    let first = irf
        .responses
        .first()
        .ok_or_else(|| Error::invalid("no responses to summarize"))?;
    let (k, cols) = first.shape();
    let mut bands = vec![DMatrix::zeros(k, cols); levels.len()];
    let mut buf = Vec::with_capacity(irf.responses.len());
    for i in 0..k {
        for h in 0..cols {
            buf.clear();
            buf.extend(irf.responses.iter().map(|r| r[(i, h)]));
            for (band, v) in bands.iter_mut().zip(summarize(&buf, levels)?) {
                band[(i, h)] = v;
            }
        }
    }
    Ok(IrfFan {
        date: irf.date,
        levels: levels.to_vec(),
        bands,
        draws: irf.responses.len(),
        excluded: irf.excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReboundCell {
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReboundColumn {
    pub date: CycleDate,
    /// `None` marks a date for which no summary could be produced.
    pub cells: Option<[ReboundCell; REBOUND_YEARS]>,
    /// Per-draw rebound values, one array per usable draw.
    pub draws: Vec<[f64; REBOUND_YEARS]>,
    pub excluded: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReboundTable {
    pub columns: Vec<ReboundColumn>,
}

/// Rebound summaries for each date. Energy is the shocked variable.
pub fn rebound_table(
    post: &TvpPosterior,
    dates: &[CycleDate],
    shock: ShockSpec,
    horizon: usize,
) -> Result<ReboundTable> {
    if dates.is_empty() {
        return Err(Error::invalid("no dates requested"));
    }
    let ppy = post.start.frequency().periods_per_year() as usize;
    let mut columns = Vec::with_capacity(dates.len());
    for date in dates {
        let absent = |note: String, excluded: usize| ReboundColumn {
            date: *date,
            cells: None,
            draws: Vec::new(),
            excluded,
            note: Some(note),
        };
        let irf = match irf_at_date(post, date.period, horizon, shock) {
            Ok(irf) => irf,
            Err(e) => {
                columns.push(absent(e.to_string(), 0));
                continue;
            }
        };
        let mut draws = Vec::with_capacity(irf.responses.len());
        let mut excluded = irf.excluded;
        for r in &irf.responses {
            let path: Vec<f64> = r.row(shock.variable).iter().copied().collect();
            match rebound_path(&path, ppy) {
                Ok(v) => draws.push(v),
                Err(Error::Domain { .. }) => excluded += 1,
                Err(e) => return Err(e),
            }
        }
        let total = irf.total_draws();
        if total == 0 || excluded as f64 > MAX_EXCLUDED_SHARE * total as f64 || draws.len() < 2 {
            columns.push(absent(
                format!("{excluded} of {total} draws excluded"),
                excluded,
            ));
            continue;
        }
        let mut cells = [ReboundCell {
            median: 0.0,
            p10: 0.0,
            p90: 0.0,
        }; REBOUND_YEARS];
        for (y, cell) in cells.iter_mut().enumerate() {
            let values: Vec<f64> = draws.iter().map(|d| d[y]).collect();
            let s = summarize(&values, &TABLE_PERCENTILES)?;
            *cell = ReboundCell {
                p10: s[0],
                median: s[1],
                p90: s[2],
            };
        }
        columns.push(ReboundColumn {
            date: *date,
            cells: Some(cells),
            draws,
            excluded,
            note: None,
        });
    }
    if columns.iter().all(|c| c.cells.is_none()) {
        let reasons: Vec<String> = columns
            .iter()
            .map(|c| format!("{}: {}", c.date.period, c.note.as_deref().unwrap_or("")))
            .collect();
        return Err(Error::Sampler(format!(
            "no rebound estimates for any date ({})",
            reasons.join("; ")
        )));
    }
    Ok(ReboundTable { columns })
}

impl ReboundTable {
    /// Date columns, year rows, cells `median|p10|p90`; absent columns hold `NA`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("year");
        for c in &self.columns {
            write!(s, ",{}", c.date.period).unwrap();
        }
        s.push('\n');
        for y in 0..REBOUND_YEARS {
            write!(s, "{}", y + 1).unwrap();
            for c in &self.columns {
                match &c.cells {
                    Some(cells) => {
                        let v = cells[y];
                        write!(s, ",{:.4}|{:.4}|{:.4}", v.median, v.p10, v.p90).unwrap();
                    }
                    None => s.push_str(",NA"),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Aligned text, cells like `75.7 [65.4, 84.0]`.
    pub fn to_text(&self) -> String {
        let cell_text = |c: &ReboundColumn, y: usize| match &c.cells {
            Some(cells) => format!(
                "{:.1} [{:.1}, {:.1}]",
                cells[y].median, cells[y].p10, cells[y].p90
            ),
            None => "n/a".to_string(),
        };
        let widths: Vec<usize> = self
            .columns
            .iter()
            .map(|c| {
                (0..REBOUND_YEARS)
                    .map(|y| cell_text(c, y).len())
                    .chain([c.date.period.to_string().len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut s = format!("{:<6}", "Year");
        for (c, w) in self.columns.iter().zip(&widths) {
            write!(s, "  {:>w$}", c.date.period.to_string(), w = *w).unwrap();
        }
        s.push('\n');
        for y in 0..REBOUND_YEARS {
            write!(s, "{:<6}", y + 1).unwrap();
            for (c, w) in self.columns.iter().zip(&widths) {
                write!(s, "  {:>w$}", cell_text(c, y), w = *w).unwrap();
            }
            s.push('\n');
        }
        for c in self.columns.iter().filter(|c| c.excluded > 0 || c.note.is_some()) {
            write!(s, "\n{}: {} draws excluded", c.date.period, c.excluded).unwrap();
            if let Some(n) = &c.note {
                write!(s, " ({n})").unwrap();
            }
        }
        if !s.ends_with('\n') {
            s.push('\n');
        }
        s
    }

    /// Tidy per-draw rebound values: `date,kind,year,draw,rebound`.
    pub fn density_csv(&self) -> String {
        let mut s = String::from("date,kind,year,draw,rebound\n");
        for c in &self.columns {
            for (d, values) in c.draws.iter().enumerate() {
                for (y, v) in values.iter().enumerate() {
                    writeln!(s, "{},{},{},{},{:?}", c.date.period, c.date.kind, y + 1, d, v).unwrap();
                }
            }
        }
        s
    }
}

impl IrfFan {
    /// Tidy percentile-level plot data: `date,variable,horizon,p17,p50,p83`.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut s = String::from("date,variable,horizon");
        for l in &self.levels {
            write!(s, ",p{l}").unwrap();
        }
        s.push('\n');
        let (k, cols) = self.bands[0].shape();
        for i in 0..k {
            for h in 0..cols {
                write!(s, "{},{},{h}", self.date, names[i]).unwrap();
                for b in &self.bands {
                    write!(s, ",{:?}", b[(i, h)]).unwrap();
                }
                s.push('\n');
            }
        }
        s
    }
}

impl IrfPosterior {
    /// Tidy draw-level plot data: `date,draw,variable,horizon,response`.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut s = String::from("date,draw,variable,horizon,response\n");
        for (d, r) in self.responses.iter().enumerate() {
            for i in 0..r.nrows() {
                for h in 0..r.ncols() {
                    writeln!(s, "{},{d},{},{h},{:?}", self.date, names[i], r[(i, h)]).unwrap();
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tvp::{PosteriorDraw, SamplerDiagnostics};
    use crate::var::{irf_constant, ImpactMatrix, VarSpec};

    fn path_with(x0: f64, xi: f64, ppy: usize) -> Vec<f64> {
        let mut p = vec![xi; default_horizon(ppy) + 1];
        p[0] = x0;
        p
    }

    #[test]
    fn rebound_unit_cases() {
        assert_eq!(rebound_path(&path_with(-1.0, -1.0, 12), 12).unwrap(), [0.0; 5]);
        assert_eq!(rebound_path(&path_with(-1.0, 0.0, 4), 4).unwrap(), [100.0; 5]);
        let r = rebound_path(&path_with(-1.0, 0.02, 4), 4).unwrap();
        assert!(r.iter().all(|v| (v - 102.0).abs() < 1e-12));
        let r = rebound_path(&path_with(-1.0, -0.243, 12), 12).unwrap();
        assert!((r[0] - 75.7).abs() < 1e-12);
    }

    #[test]
    fn rebound_reads_yearly_horizons() {
        let p: Vec<f64> = (0..=20).map(|h| -(0.8f64.powi(h))).collect();
        let r = rebound_path(&p, 4).unwrap();
        for (i, v) in r.iter().enumerate() {
            assert!((v - (1.0 - 0.8f64.powi(4 * (i as i32 + 1))) * 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negligible_impact_is_excluded() {
        let mut p = path_with(1e-15, 0.5, 4);
        assert!(matches!(rebound_path(&p, 4), Err(Error::Domain { .. })));
        p[0] = 0.0;
        assert!(matches!(rebound_path(&p, 4), Err(Error::Domain { .. })));
        assert!(matches!(rebound_path(&[1.0; 5], 4), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn percentile_conventions() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(summarize(&v, &[50.0]).unwrap(), vec![50.5]);
        assert_eq!(summarize(&v, &[0.0, 100.0]).unwrap(), vec![1.0, 100.0]);
        assert_eq!(summarize(&[3.0; 7], &TABLE_PERCENTILES).unwrap(), vec![3.0; 3]);
        assert!(summarize(&[], &[50.0]).is_err());
        assert!(summarize(&[1.0], &[50.0]).is_err());
        assert!(summarize(&v, &[101.0]).is_err());
    }

    fn collapsed(ndraws: usize) -> (TvpPosterior, Vec<DMatrix<f64>>, DMatrix<f64>) {
        let spec = VarSpec::new(3, 2, true).unwrap();
        let beta: Vec<f64> = (0..spec.n_coefficients())
            .map(|i| if i % 7 == 1 { 0.45 } else { 0.03 * ((i % 5) as f64 - 2.0) })
            .collect();
        let alpha = [0.3, -0.2, 0.5];
        let ls = [-0.1, 0.2, -0.4];
        let t = 6;
        let draw = PosteriorDraw {
            beta: DMatrix::from_fn(t, beta.len(), |_, j| beta[j]),
            alpha: DMatrix::from_fn(t, 3, |_, j| alpha[j]),
            log_sigma: DMatrix::from_fn(t, 3, |_, j| ls[j]),
            q: DMatrix::zeros(beta.len(), beta.len()),
            s: vec![DMatrix::zeros(1, 1), DMatrix::zeros(2, 2)],
            w: DMatrix::zeros(3, 3),
        };
        let post = TvpPosterior {
            spec,
            names: vec!["y".into(), "e".into(), "pr".into()],
            start: Period::quarterly(2001, 1).unwrap(),
            nobs: t,
            draws: vec![draw.clone(); ndraws],
            diagnostics: SamplerDiagnostics::default(),
        };
        let lags = spec.unpack(&beta).lags;
        (post, lags, draw.covariance(0))
    }

    #[test]
    fn collapsed_posterior_matches_constant_irf() {
        let (post, lags, omega) = collapsed(4);
        let shock = ShockSpec::negative(1);
        let date = Period::quarterly(2001, 3).unwrap();
        let irf = irf_at_date(&post, date, 20, shock).unwrap();
        let l = omega.cholesky().unwrap().unpack();
        let oracle = irf_constant(&lags, &ImpactMatrix::from_lower(l).unwrap(), 20, shock).unwrap();
        for r in &irf.responses {
            assert!((r - &oracle).amax() < 1e-12);
            assert!(r[(1, 0)] < 0.0);
        }
    }

    #[test]
    fn shock_size_scales_responses() {
        let (post, _, _) = collapsed(3);
        let date = Period::quarterly(2001, 2).unwrap();
        let a = irf_at_date(&post, date, 20, ShockSpec::negative(1)).unwrap();
        let b = irf_at_date(&post, date, 20, ShockSpec { size: 2.0, ..ShockSpec::negative(1) })
            .unwrap();
        for (x, y) in a.responses.iter().zip(&b.responses) {
            assert_eq!(x * 2.0, *y);
        }
    }

    #[test]
    fn date_outside_sample_lists_range() {
        let (post, _, _) = collapsed(2);
        let err = irf_at_date(&post, Period::quarterly(2005, 1).unwrap(), 20, ShockSpec::negative(1))
            .unwrap_err();
        assert!(err.to_string().contains("2001Q1"));
    }

    #[test]
    fn table_from_collapsed_posterior() {
        let (post, lags, omega) = collapsed(5);
        let shock = ShockSpec::negative(1);
        let date = Period::quarterly(2001, 4).unwrap();
        let table = rebound_table(
            &post,
            &[CycleDate::peak(date), CycleDate::trough(Period::quarterly(1999, 1).unwrap())],
            shock,
            20,
        )
        .unwrap();
        let l = omega.cholesky().unwrap().unpack();
        let oracle = irf_constant(&lags, &ImpactMatrix::from_lower(l).unwrap(), 20, shock).unwrap();
        let cells = table.columns[0].cells.unwrap();
        for (y, cell) in cells.iter().enumerate() {
            let expected = (1.0 - oracle[(1, 4 * (y + 1))] / oracle[(1, 0)]) * 100.0;
            assert!((cell.median - expected).abs() < 1e-10);
            assert_eq!(cell.p10, cell.median);
        }
        assert!(table.columns[1].cells.is_none());
        let csv = table.to_csv();
        assert!(csv.starts_with("year,2001Q4,1999Q1\n"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",NA"));
        assert!(table.to_text().contains("n/a"));
    }

    #[test]
    fn all_dates_invalid_is_an_error() {
        let (post, _, _) = collapsed(2);
        let d = CycleDate::peak(Period::quarterly(1980, 1).unwrap());
        assert!(rebound_table(&post, &[d], ShockSpec::negative(1), 20).is_err());
    }

    #[test]
    fn text_cell_format() {
        let cell = ReboundCell {
            median: 75.7,
            p10: 65.4,
            p90: 84.0,
        };
        let table = ReboundTable {
            columns: vec![ReboundColumn {
                date: CycleDate::peak(Period::monthly(1980, 1).unwrap()),
                cells: Some([cell; REBOUND_YEARS]),
                draws: vec![],
                excluded: 0,
                note: None,
            }],
        };
        assert!(table.to_text().contains("75.7 [65.4, 84.0]"));
        assert!(table.to_csv().contains("75.7000|65.4000|84.0000"));
    }
}
