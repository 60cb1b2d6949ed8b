//! `singlering`: runs single-ring experiments and writes plot-ready data.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{ExperimentKind, Overrides};
use output::Sink;

#[derive(Parser)]
#[command(name = "singlering", version, about = "Single ring random matrix experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base seed; trial t uses stream t.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Matrix dimension N.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Laurent truncation degree for series-based predictions.
    #[arg(long, global = true)]
    truncation: Option<u32>,
    /// Output directory; without it only the stdout summary is produced.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of one sample.
    Spectrum,
    /// Limit covariances of the configured observables.
    Covariance,
    /// Monte Carlo fluctuations against the limit covariances.
    Fluctuations,
    /// Exact Weingarten table.
    Weingarten {
        /// Order of the table.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Outliers of a multiplicative perturbation.
    Outliers,
    /// Fluctuations of log |det(z - A)|.
    Charpoly,
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let (kind, k) = match cli.command {
        Command::Spectrum => (ExperimentKind::Spectrum, None),
        Command::Covariance => (ExperimentKind::Covariance, None),
        Command::Fluctuations => (ExperimentKind::Fluctuations, None),
        Command::Weingarten { k } => (ExperimentKind::Weingarten, k),
        Command::Outliers => (ExperimentKind::Outliers, None),
        Command::Charpoly => (ExperimentKind::Charpoly, None),
    };
    let ov = Overrides {
        dim: cli.dim,
        trials: cli.trials,
        seed: cli.seed,
        truncation: cli.truncation,
        k,
    };
    let cfg = config::load(cli.config.as_ref(), kind, &ov)?;
    let sink = Sink::new(cli.out)?;
    let outcome = match cfg.kind {
        ExperimentKind::Spectrum => commands::spectrum(&cfg, &sink),
        ExperimentKind::Covariance => commands::covariance(&cfg, &sink),
        ExperimentKind::Fluctuations => commands::fluctuations(&cfg, &sink),
        ExperimentKind::Weingarten => commands::weingarten(&cfg, &sink),
        ExperimentKind::Outliers => commands::outliers(&cfg, &sink),
        ExperimentKind::Charpoly => commands::charpoly(&cfg, &sink),
    }
    .with_context(|| format!("{} failed", kind.name()))?;
    if outcome.flagged {
        eprintln!("warning: Gaussianity diagnostics flagged at least one test");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
