//! `fkwave` command line: configuration, caching and artifact output around
//! the solver pipeline.

mod cache;
mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::commands::Ctx;
use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl From<fkwave::Error> for CliError {
    fn from(e: fkwave::Error) -> Self {
        match e {
            fkwave::Error::Config(m) => CliError::Config(m),
            fkwave::Error::Numerical(m) => CliError::Numerical(m),
            fkwave::Error::Invariant(m) => CliError::Invariant(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fkwave", version, about = "Travelling heteroclinic waves of the Frenkel-Kontorova chain")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set grid.inv_h=32`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Run once per value in parallel, e.g. `--sweep epsilon=1e-3,1e-2`.
    /// Each run writes to `<output_dir>/<key>=<value>`.
    #[arg(long, global = true, value_name = "KEY=V1,V2,...")]
    sweep: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Real roots of the dispersion relation and the spectral gap.
    Dispersion,
    /// Check the potential bounds.
    PotentialCertify,
    /// Baseline profile at ε = 0.
    Exact,
    /// Wave-train cache and period map.
    Wavetrain,
    /// Profiles of the approximate-solution family.
    Family,
    /// Full chain through the corrector and the invariant suite.
    Solve,
    /// Solve, then report the invariant suite and the orthogonality check.
    Verify,
    /// Solve, then integrate the lattice and compare with the travelling wave.
    Evolve,
}

fn run(command: Command, cfg: RunConfig) -> Result<String, CliError> {
    let ctx = Ctx::new(cfg)?;
    match command {
        Command::Dispersion => commands::dispersion(&ctx),
        Command::PotentialCertify => commands::potential_certify(&ctx),
        Command::Exact => commands::exact(&ctx),
        Command::Wavetrain => commands::wavetrain(&ctx),
        Command::Family => commands::family(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Evolve => commands::evolve(&ctx),
    }
}

fn sweep_runs(cli: &Cli, sweep: &str) -> Result<Vec<(String, Vec<String>)>, CliError> {
    let (key, values) = sweep
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--sweep expects key=v1,v2,..., got {sweep:?}")))?;
    let base = RunConfig::load(cli.config.as_deref(), &cli.sets)?;
    Ok(values
        .split(',')
        .filter(|v| !v.is_empty())
        .map(|v| {
            let label = format!("{key}={v}");
            let dir = base.output_dir.join(&label);
            let mut sets = cli.sets.clone();
            sets.push(label.clone());
            sets.push(format!("output_dir={}", serde_json::to_string(&dir).unwrap()));
            (label, sets)
        })
        .collect())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(sweep) = cli.sweep.clone() else {
        let result = RunConfig::load(cli.config.as_deref(), &cli.sets).and_then(|cfg| run(cli.command, cfg));
        return match result {
            Ok(line) => {
                println!("{line}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("fkwave: {e}");
                ExitCode::from(e.exit_code())
            }
        };
    };
    let runs = match sweep_runs(&cli, &sweep) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("fkwave: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let results: Vec<(String, Result<String, CliError>)> = runs
        .par_iter()
        .map(|(label, sets)| {
            let r = RunConfig::load(cli.config.as_deref(), sets).and_then(|cfg| run(cli.command, cfg));
            (label.clone(), r)
        })
        .collect();
    let mut code = 0u8;
    for (label, r) in results {
        match r {
            Ok(line) => println!("[{label}] {line}"),
            Err(e) => {
                eprintln!("[{label}] fkwave: {e}");
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code)
}
