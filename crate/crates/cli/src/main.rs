//! `ssi-relay`: analytic evaluation, simulation and sweeps of SSI-based
//! partial relay selection from a JSON experiment file.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueHint};
use serde::Serialize;

use config::Overrides;

#[derive(Parser)]
#[command(name = "ssi-relay", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment file, or `builtin:table1`.
    #[arg(long, global = true, value_hint = ValueHint::FilePath)]
    config: Option<String>,
    /// Write results here instead of standard output.
    #[arg(long, global = true, value_hint = ValueHint::FilePath)]
    output: Option<PathBuf>,
    /// Simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulation draws; enables simulated sweep columns.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Worker threads for sweeps and simulation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// With `sweep --output FILE`, also write a gnuplot script FILE.gp.
    #[arg(long, global = true)]
    emit_plot: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Analytic value at `snr_db` for every configured protocol.
    Compute,
    /// Monte Carlo estimate at `snr_db` for every configured protocol.
    Simulate,
    /// CSV over the sweep grid, with simulated columns when enabled.
    Sweep,
    /// Normalization, selection-probability and fast-path consistency checks.
    Check,
}

#[derive(Debug)]
pub enum CliError {
    Config { path: String, message: String },
    Io { path: String, message: String },
    Unsupported(String),
    Engine(ssi_relay_core::Error),
    CheckFailed(usize),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            Self::Config { .. } => "config",
            Self::Io { .. } => "io",
            Self::Unsupported(_) => "unsupported",
            Self::Engine(_) => "engine",
            Self::CheckFailed(_) => "check_failed",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config { .. } | Self::Unsupported(_) => 2,
            _ => 1,
        }
    }

    fn record(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Record<'a> {
            kind: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            path: Option<&'a str>,
            message: String,
        }
        let path = match self {
            Self::Config { path, .. } | Self::Io { path, .. } => Some(path.as_str()),
            _ => None,
        };
        serde_json::json!({
            "error": Record {
                kind: self.kind(),
                path,
                message: self.to_string(),
            }
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config { path, message } if path.is_empty() => write!(f, "{message}"),
            Self::Config { path, message } => write!(f, "{path}: {message}"),
            Self::Io { path, message } => write!(f, "{path}: {message}"),
            Self::Unsupported(m) => f.write_str(m),
            Self::Engine(e) => write!(f, "{e}"),
            Self::CheckFailed(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl From<ssi_relay_core::Error> for CliError {
    fn from(e: ssi_relay_core::Error) -> Self {
        Self::Engine(e)
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config {
        path: "--config".into(),
        message: "an experiment file is required".into(),
    })?;
    let exp = config::load(
        path,
        Overrides {
            seed: cli.seed,
            samples: cli.samples,
            workers: cli.workers,
        },
    )?;
    if cli.emit_plot && (!matches!(cli.command, Command::Sweep) || cli.output.is_none()) {
        return Err(CliError::Config {
            path: "--emit-plot".into(),
            message: "needs the sweep command and --output".into(),
        });
    }
    match cli.command {
        Command::Compute => write_output(cli.output.as_ref(), &commands::compute(&exp)?),
        Command::Simulate => write_output(cli.output.as_ref(), &commands::simulate(&exp)?),
        Command::Sweep => {
            let table = commands::sweep(&exp)?;
            write_output(cli.output.as_ref(), &table.to_csv())?;
            if let (true, Some(out)) = (cli.emit_plot, &cli.output) {
                let script = out.with_extension("gp");
                write_output(Some(&script), &output::gnuplot(&table, out, &exp))?;
            }
            Ok(())
        }
        Command::Check => {
            let report = commands::check(&exp)?;
            write_output(cli.output.as_ref(), &report.text())?;
            match report.failed() {
                0 => Ok(()),
                n => Err(CliError::CheckFailed(n)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}
