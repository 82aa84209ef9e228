//! The `qdo` command line.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numerical failure or failed
//! validation, 4 censored Monte Carlo paths.

mod commands;
pub mod config;
pub mod format;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

pub use config::{Overrides, RunConfig};

use crate::error::QdoError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CENSORED: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, message: message.into() }
    }
}

impl From<QdoError> for CliError {
    fn from(e: QdoError) -> Self {
        let code = match e {
            QdoError::QuadratureFailure { .. } | QdoError::BracketFailure { .. } => EXIT_NUMERIC,
            QdoError::CensoredPath { .. } => EXIT_CENSORED,
            _ => EXIT_CONFIG,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qdo", version, about = "Quickest detection with costly observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Regime, thresholds and constants of the value function
    Solve,
    /// CSV of the value function, its derivatives and the operators on a grid
    Table,
    /// Monte Carlo cost of a strategy
    Simulate,
    /// Monte Carlo against the analytic cost; exit 3 on disagreement
    Validate,
    /// Expected time to the alarm
    Hittime,
    /// Exact vs Euler posterior on observation paths
    #[command(name = "filter-demo")]
    FilterDemo,
}

/// Runs the CLI with the process environment and standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_seed = std::env::var("QDO_SEED").ok();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_with(args, env_seed.as_deref(), &mut out, &mut err)
}

pub fn run_with<I, T>(args: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = RunConfig::resolve(cli.overrides, env_seed).and_then(|mut cfg| {
        let default_paths = match cli.command {
            Command::Simulate | Command::Validate | Command::Hittime => Some(commands::DEFAULT_PATHS),
            Command::FilterDemo if cfg.input.is_none() => Some(1),
            _ => None,
        };
        if cfg.n_paths.is_none() {
            cfg.n_paths = default_paths;
        }
        dispatch(cli.command, &cfg, out)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: Command, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Solve => commands::cmd_solve(cfg, out),
        Command::Table => commands::cmd_table(cfg, out),
        Command::Simulate => commands::cmd_simulate(cfg, out),
        Command::Validate => commands::cmd_validate(cfg, out),
        Command::Hittime => commands::cmd_hittime(cfg, out),
        Command::FilterDemo => commands::cmd_filter_demo(cfg, out),
    }
}
