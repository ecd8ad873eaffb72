//! Command-line front end for the interferometer-series simulator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 validity-domain error
//! (a Multisimultaneity table left [0, 1] at the requested phases),
//! 3 statistical-check failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;
mod output;

use commands::{ParameterField, QuantityField};
use config::{TheoryField, TimingField};
use output::Format;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Validity(String),
    #[error("statistical check failed: {0}")]
    StatCheck(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Validity(_) => 2,
            CliError::StatCheck(_) => 3,
        }
    }
}

impl From<tandem::Error> for CliError {
    fn from(err: tandem::Error) -> Self {
        match err {
            tandem::Error::InvalidProbability { .. } => CliError::Validity(err.to_string()),
            _ => CliError::Config(err.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tandem",
    version,
    about = "Two-photon interferometer-series experiments: quantum mechanics vs Multisimultaneity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form joint probabilities, marginals and correlators.
    Predict {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured theory.
        #[arg(long, value_enum)]
        theory: Option<TheoryField>,
        /// Override the configured timing class (MS only).
        #[arg(long, value_enum)]
        timing: Option<TimingField>,
        /// Directory for machine-readable output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Before/non-before classification of the splitter impacts.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Monte Carlo run: event file, time-delay spectrum, estimates.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        theory: Option<TheoryField>,
        #[arg(long, value_enum)]
        timing: Option<TimingField>,
        /// Override the configured trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Spectrum bin width in seconds (default: peak separation / 10).
        #[arg(long)]
        bin_width: Option<f64>,
        /// Output directory for events.csv, spectrum.csv, estimates.json.
        #[arg(long, default_value = "tandem-out")]
        out: PathBuf,
        /// Fail (exit 3) when a windowed correlator strays beyond 4 sigma
        /// of the closed-form prediction.
        #[arg(long)]
        check: bool,
    },
    /// Sweep one phase and tabulate a correlator for QM and MS side by side.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        parameter: ParameterField,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum)]
        quantity: QuantityField,
        /// Timing class for the MS column (defaults to the configured one).
        #[arg(long, value_enum)]
        timing: Option<TimingField>,
        /// Directory for scan.csv / scan.json; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Detector-link rates: the one photon-one count argument.
    Paradox,
    /// No-signaling audit: analytic grid plus sampled marginals.
    Audit {
        /// Points per phase axis of the analytic grid.
        #[arg(long, default_value_t = 12)]
        grid_steps: usize,
        #[arg(long, default_value_t = 200_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Predict {
            config,
            theory,
            timing,
            out,
            format,
        } => commands::cmd_predict(&config, theory, timing, out.as_deref(), format),
        Command::Classify {
            config,
            out,
            format,
        } => commands::cmd_classify(&config, out.as_deref(), format),
        Command::Simulate {
            config,
            theory,
            timing,
            trials,
            seed,
            bin_width,
            out,
            check,
        } => commands::cmd_simulate(
            &config, theory, timing, trials, seed, bin_width, &out, check,
        ),
        Command::Scan {
            config,
            parameter,
            start,
            stop,
            steps,
            quantity,
            timing,
            out,
            format,
        } => commands::cmd_scan(
            &config,
            parameter,
            start,
            stop,
            steps,
            quantity,
            timing,
            out.as_deref(),
            format,
        ),
        Command::Paradox => {
            commands::cmd_paradox();
            Ok(())
        }
        Command::Audit {
            grid_steps,
            trials,
            seed,
            out,
            format,
        } => commands::cmd_audit(grid_steps, trials, seed, out.as_deref(), format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
