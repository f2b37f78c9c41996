//! Binary serialization of posterior draws.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "TVPPOST\0" | version u32
//! nvars u32 | lags u32 | intercept u8
//! frequency u8 (0 monthly, 1 quarterly) | start year i32 | start subperiod u32
//! nobs u64 | ndraws u64
//! sweeps u64 | failed sweeps u64 | stationarity rejections u64
//! nvars × (name length u32, UTF-8 bytes)
//! ndraws × (β T×nβ, α T×nα, log σ T×K, Q, S blocks, W), row-major f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{alpha_blocks, PosteriorDraw, SamplerDiagnostics, TvpPosterior};
use crate::error::{Error, Result};
use crate::series::{Frequency, Period};
use crate::var::VarSpec;

pub const MAGIC: &[u8; 8] = b"TVPPOST\0";
pub const VERSION: u32 = 1;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn put_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_posterior<W: Write>(post: &TvpPosterior, w: &mut W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(post.spec.nvars as u32).to_le_bytes())?;
    w.write_all(&(post.spec.lags as u32).to_le_bytes())?;
    w.write_all(&[post.spec.intercept as u8])?;
    let freq = match post.start.frequency() {
        Frequency::Monthly => 0u8,
        Frequency::Quarterly => 1,
    };
    w.write_all(&[freq])?;
    w.write_all(&post.start.year().to_le_bytes())?;
    w.write_all(&post.start.subperiod().to_le_bytes())?;
    for n in [
        post.nobs,
        post.draws.len(),
        post.diagnostics.sweeps,
        post.diagnostics.failed_sweeps,
        post.diagnostics.stationarity_rejections,
    ] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for name in &post.names {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    for d in &post.draws {
        for m in [&d.beta, &d.alpha, &d.log_sigma, &d.q] {
            put_matrix(w, m)?;
        }
        for s in &d.s {
            put_matrix(w, s)?;
        }
        put_matrix(w, &d.w)?;
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Format(format!("truncated while reading {what}")))?;
        Ok(buf)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.bytes::<1>(what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.bytes(what)?))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let v = u64::from_le_bytes(self.bytes(what)?);
        usize::try_from(v).map_err(|_| Error::Format(format!("{what} out of range")))
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f64::from_le_bytes(self.bytes(what)?);
            }
        }
        Ok(m)
    }
}

pub fn read_posterior<R: Read>(r: R) -> Result<TvpPosterior> {
    let mut c = Cursor { inner: r };
    if &c.bytes::<8>("magic")? != MAGIC {
        return Err(Error::Format("not a posterior file".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let nvars = c.u32("nvars")? as usize;
    let lags = c.u32("lags")? as usize;
    let intercept = match c.u8("intercept flag")? {
        0 => false,
        1 => true,
        b => return Err(Error::Format(format!("bad intercept flag {b}"))),
    };
    let spec = VarSpec::new(nvars, lags, intercept).map_err(|e| Error::Format(e.to_string()))?;
    let frequency = match c.u8("frequency")? {
        0 => Frequency::Monthly,
        1 => Frequency::Quarterly,
        b => return Err(Error::Format(format!("bad frequency tag {b}"))),
    };
    let year = c.i32("start year")?;
    let sub = c.u32("start subperiod")?;
    let start = Period::new(year, sub, frequency).map_err(|e| Error::Format(e.to_string()))?;
    let nobs = c.usize("nobs")?;
    let ndraws = c.usize("draw count")?;
    let diagnostics = SamplerDiagnostics {
        sweeps: c.usize("sweeps")?,
        failed_sweeps: c.usize("failed sweeps")?,
        stationarity_rejections: c.usize("rejections")?,
    };
    let mut names = Vec::with_capacity(nvars);
    for _ in 0..nvars {
        let len = c.u32("name length")? as usize;
        if len > 4096 {
            return Err(Error::Format("variable name too long".into()));
        }
        let mut buf = vec![0u8; len];
        c.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated variable name".into()))?;
        names.push(String::from_utf8(buf).map_err(|_| Error::Format("name is not UTF-8".into()))?);
    }
    let nb = spec.n_coefficients();
    let na = spec.n_contemporaneous();
    let blocks = alpha_blocks(nvars);
    let mut draws = Vec::new();
    for _ in 0..ndraws {
        let beta = c.matrix(nobs, nb, "beta")?;
        let alpha = c.matrix(nobs, na, "alpha")?;
        let log_sigma = c.matrix(nobs, nvars, "log sigma")?;
        let q = c.matrix(nb, nb, "Q")?;
        let s = blocks
            .iter()
            .map(|r| c.matrix(r.len(), r.len(), "S"))
            .collect::<Result<_>>()?;
        let w = c.matrix(nvars, nvars, "W")?;
        draws.push(PosteriorDraw {
            beta,
            alpha,
            log_sigma,
            q,
            s,
            w,
        });
    }
    if c.inner.read(&mut [0u8; 1]).map_err(|_| Error::Format("read failure".into()))? != 0 {
        return Err(Error::Format("trailing bytes after last draw".into()));
    }
    Ok(TvpPosterior {
        spec,
        names,
        start,
        nobs,
        draws,
        diagnostics,
    })
}

/// Writes to `path`, returning the number of bytes written.
pub fn save_posterior(post: &TvpPosterior, path: &Path) -> Result<u64> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_posterior(post, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))?;
    let len = w.get_ref().metadata().map_err(io_err(path))?.len();
    Ok(len)
}

pub fn load_posterior(path: &Path) -> Result<TvpPosterior> {
    let file = File::open(path).map_err(io_err(path))?;
    read_posterior(BufReader::new(file))
}
