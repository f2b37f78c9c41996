//! Moments and growth rates over peak-to-peak business cycles.

use std::fmt::Write as _;

use rebound_core::series::{Dataset, Period};
use rebound_core::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CycleWindow {
    pub from: Period,
    /// Inclusive end: the period before the next peak, or the final peak itself.
    pub to: Period,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Average per-period percent change; `None` for non-level series or
    /// when no change falls inside the window.
    pub growth: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleDescription {
    pub names: Vec<String>,
    pub windows: Vec<CycleWindow>,
}

/// Splits the span between the first and last peak into consecutive
/// windows `[peak_i, peak_{i+1})`, the last one closed, and summarizes each.
///
/// Variances use the `n - 1` divisor. Growth is averaged over the changes
/// `x_t / x_{t-1} - 1` whose end period lies in the window.
pub fn describe_cycles(data: &Dataset, peaks: &[Period], level: &[bool]) -> Result<CycleDescription> {
    if peaks.len() < 2 {
        return Err(Error::InvalidInput("at least two peak dates are needed".into()));
    }
    if level.len() != data.nvars() {
        return Err(Error::InvalidInput("one level flag per variable is needed".into()));
    }
    let mut idx = Vec::with_capacity(peaks.len());
    for p in peaks {
        let i = data.index_of(p).ok_or_else(|| {
            Error::InvalidInput(format!(
                "peak {p} outside the data span {}..{}",
                data.start(),
                data.end()
            ))
        })?;
        idx.push(i);
    }
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("peak dates must be strictly increasing".into()));
    }
    let m = data.matrix();
    let last = idx.len() - 2;
    let windows = idx
        .windows(2)
        .enumerate()
        .map(|(w, pair)| {
            let lo = pair[0];
            let hi = if w == last { pair[1] } else { pair[1] - 1 };
            let n = (hi - lo + 1) as f64;
            let mut mean = Vec::new();
            let mut variance = Vec::new();
            let mut growth = Vec::new();
            for j in 0..data.nvars() {
                let col: Vec<f64> = (lo..=hi).map(|t| m[(t, j)]).collect();
                let mu = col.iter().sum::<f64>() / n;
                let var = if col.len() > 1 {
                    col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                mean.push(mu);
                variance.push(var);
                let g = if level[j] {
                    let changes: Vec<f64> = (lo.max(1)..=hi)
                        .map(|t| (m[(t, j)] / m[(t - 1, j)] - 1.0) * 100.0)
                        .collect();
                    (!changes.is_empty()).then(|| changes.iter().sum::<f64>() / changes.len() as f64)
                } else {
                    None
                };
                growth.push(g);
            }
            CycleWindow {
                from: data.start().offset(lo as i64),
                to: data.start().offset(hi as i64),
                mean,
                variance,
                growth,
            }
        })
        .collect();
    Ok(CycleDescription {
        names: data.names().to_vec(),
        windows,
    })
}

impl CycleDescription {
    /// `cycle,variable,mean,variance`
    pub fn moments_csv(&self) -> String {
        let mut s = String::from("cycle,variable,mean,variance\n");
        for w in &self.windows {
            for (j, name) in self.names.iter().enumerate() {
                writeln!(s, "{}-{},{name},{:?},{:?}", w.from, w.to, w.mean[j], w.variance[j]).unwrap();
            }
        }
        s
    }

    /// `cycle,variable,growth_pct` for level series only.
    pub fn growth_csv(&self) -> String {
        let mut s = String::from("cycle,variable,growth_pct\n");
        for w in &self.windows {
            for (j, name) in self.names.iter().enumerate() {
                if let Some(g) = w.growth[j] {
                    writeln!(s, "{}-{},{name},{g:?}", w.from, w.to).unwrap();
                }
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<20}", "Cycle");
        for n in &self.names {
            write!(s, " {:>14} {:>14}", format!("{n} mean"), format!("{n} var")).unwrap();
        }
        s.push('\n');
        for w in &self.windows {
            write!(s, "{:<20}", format!("{}-{}", w.from, w.to)).unwrap();
            for j in 0..self.names.len() {
                write!(s, " {:>14.4} {:>14.4}", w.mean[j], w.variance[j]).unwrap();
            }
            s.push('\n');
        }
        if self.windows.iter().any(|w| w.growth.iter().any(Option::is_some)) {
            s.push_str("\nAverage growth per period (%)\n");
            for w in &self.windows {
                write!(s, "{:<20}", format!("{}-{}", w.from, w.to)).unwrap();
                for (j, n) in self.names.iter().enumerate() {
                    if let Some(g) = w.growth[j] {
                        write!(s, " {n} {g:.3}").unwrap();
                    }
                }
                s.push('\n');
            }
        }
        s
    }
}
