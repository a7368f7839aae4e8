//! Command-line front end: JSON configs in, JSON/CSV artifacts out.

mod commands;
pub mod config;
mod validate;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{run_command, schema, simulation_from_config, Artifacts};
pub use validate::{validate_config, Report};

use crate::error::Error;

/// Exit code for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical failures.
pub const EXIT_NUMERIC: i32 = 3;
/// Exit code for usage errors.
pub const EXIT_USAGE: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandKind {
    Simulate,
    BuildSurrogate,
    Calibrate,
    Sample,
    Predict,
    TrainControl,
    Control,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::BuildSurrogate => "build-surrogate",
            CommandKind::Calibrate => "calibrate",
            CommandKind::Sample => "sample",
            CommandKind::Predict => "predict",
            CommandKind::TrainControl => "train-control",
            CommandKind::Control => "control",
        }
    }

    /// Inverse of [`CommandKind::name`].
    pub fn from_name(name: &str) -> Option<Self> {
        Self::value_variants().iter().copied().find(|k| k.name() == name)
    }
}

#[derive(Debug, Parser)]
#[command(name = "lpbf-twin", version, about = "Stochastic melt-pool digital twin for laser powder bed fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single deterministic or stochastic scan: trace CSV and report JSON.
    Simulate { config: PathBuf },
    /// Sample the solver on a design grid and fit the separated surrogate.
    BuildSurrogate { config: PathBuf },
    /// Fit heat-source hyperparameters to melt-pool statistics.
    Calibrate { config: PathBuf },
    /// Random-walk Metropolis chain over calibrated parameters.
    Sample { config: PathBuf },
    /// Stochastic part-scale run: quality report and height field.
    Predict { config: PathBuf },
    /// Generate plant traces and train the autoregressive controller.
    TrainControl { config: PathBuf },
    /// Closed-loop tracking with a trained controller.
    Control { config: PathBuf },
    /// Check a config without running it.
    Validate { command: CommandKind, config: PathBuf },
    /// Print the JSON schema of a command's config.
    Schema { command: CommandKind },
}

/// Map an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERIC
    }
}

/// Execute a parsed command line, returning the exit code.
pub fn run(cli: Cli) -> i32 {
    let (kind, path): (CommandKind, &Path) = match &cli.command {
        Command::Simulate { config } => (CommandKind::Simulate, config),
        Command::BuildSurrogate { config } => (CommandKind::BuildSurrogate, config),
        Command::Calibrate { config } => (CommandKind::Calibrate, config),
        Command::Sample { config } => (CommandKind::Sample, config),
        Command::Predict { config } => (CommandKind::Predict, config),
        Command::TrainControl { config } => (CommandKind::TrainControl, config),
        Command::Control { config } => (CommandKind::Control, config),
        Command::Validate { command, config } => {
            return match validate_config(*command, config) {
                Ok(report) => {
                    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                    if report.errors.is_empty() { 0 } else { EXIT_CONFIG }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            };
        }
        Command::Schema { command } => {
            println!("{}", commands::schema(*command));
            return 0;
        }
    };
    match run_command(kind, path) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
