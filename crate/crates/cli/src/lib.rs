//! Batch front end for the `kvbeam` toolkit.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numerical(String),
    /// Selected criteria failed (verify) or nothing could be resolved.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<kvbeam::Error> for CliError {
    fn from(e: kvbeam::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "kvbeam", version, about = "Kelvin-Voigt damped Timoshenko beam experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; `KVBEAM_SECTION__KEY` variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output table (standard output if omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Energy trace E(t) of the implicit midpoint scheme with a decay fit.
    Simulate,
    /// Roots of the characteristic determinant along the asymptotic branches.
    Spectrum,
    /// Discrete resolvent norms along the imaginary axis.
    Resolvent,
    /// Acceptance suites listed in `verify.suites`.
    Verify,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let cfg = config::load(cli.config.as_deref(), std::env::vars())?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg)?.emit(out),
        Command::Spectrum => {
            let (table, any_resolved) = commands::cmd_spectrum(&cfg)?;
            table.emit(out)?;
            if any_resolved {
                Ok(())
            } else {
                Err(CliError::Numerical("no root could be resolved".into()))
            }
        }
        Command::Resolvent => commands::cmd_resolvent(&cfg)?.emit(out),
        Command::Verify => {
            let (table, reports) = commands::cmd_verify(&cfg)?;
            table.emit(out)?;
            let failed: Vec<&str> = reports.iter().filter(|r| r.outcome.is_fail()).map(|r| r.suite.name()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Failed(format!("failed: {}", failed.join(", "))))
            }
        }
    }
}
