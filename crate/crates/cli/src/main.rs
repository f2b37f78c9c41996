use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rebound_cli::config::{Profile, RunConfig};
use rebound_cli::pipeline::{self, PipelineError};

#[derive(Parser)]
#[command(name = "rebound", version, about = "Time-varying VAR estimates of the energy rebound effect")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: ingest, describe, lag selection, sampling, rebound tables
    Run(Common),
    /// Moments and growth rates over peak-to-peak cycles
    Describe(Common),
    /// Cross-correlations between adjacent variables
    Ccf(Common),
    /// Write a synthetic dataset with known time-varying parameters
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`)
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Sampler profile: `full` or `desk`
    #[arg(long)]
    profile: Option<Profile>,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, PathBuf), PipelineError> {
        let mut cfg = RunConfig::load(&self.config).map_err(PipelineError::config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(profile) = self.profile {
            cfg.profile = profile;
        }
        cfg.validate().map_err(PipelineError::config)?;
        let out = match (&self.out, &cfg.output.dir) {
            (Some(o), _) => o.clone(),
            (None, Some(d)) => cfg.resolve(d),
            (None, None) => PathBuf::from("out"),
        };
        Ok((cfg, out))
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, out) = c.load()?;
            let m = pipeline::run(&cfg, &out)?;
            println!("{}: {} files in {}", m.status, m.outputs.len() + 1, out.display());
        }
        Command::Describe(c) => {
            let (cfg, out) = c.load()?;
            report(&pipeline::describe(&cfg, &out)?, &out);
        }
        Command::Ccf(c) => {
            let (cfg, out) = c.load()?;
            report(&pipeline::cross_correlations(&cfg, &out)?, &out);
        }
        Command::Simulate(c) => {
            let (cfg, out) = c.load()?;
            report(&pipeline::simulate(&cfg, &out)?, &out);
        }
    }
    Ok(())
}

fn report(files: &[pipeline::OutputFile], dir: &std::path::Path) {
    for f in files {
        println!("{} ({} bytes)", dir.join(&f.path).display(), f.bytes);
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
