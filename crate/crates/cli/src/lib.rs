//! Command-line driver: forward evaluation, synthetic observations, single
//! inversions, noise campaigns and trace reports.
//!
//! Exit codes: 0 success, 1 I/O or runtime failure, 2 invalid input. `invert`
//! additionally returns 3 for `mu_blowup`, 4 for `model_failure` and 5 for
//! `max_iterations`.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use bioinverse_core::synth::NOISE_GENERATOR;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub const THREADS_ENV: &str = "BIOINVERSE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) | Self::Run(_) => 1,
        }
    }
}

impl From<bioinverse_core::io::IoError> for CliError {
    fn from(e: bioinverse_core::io::IoError) -> Self {
        Self::Io(e.to_string())
    }
}

/// Stamped into every output so a file can be traced to its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub noise_generator: String,
}

impl RunProvenance {
    pub fn new(config_sha256: &str, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: config_sha256.into(),
            seed,
            noise_generator: NOISE_GENERATOR.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bioinverse", version, about = "Ray-based inverse analysis of biofilm interfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Noise seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the forward model and write the interface.
    Forward {
        #[command(flatten)]
        common: Common,
        /// Parameters as a comma-separated list; defaults to `theta_true`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
    },
    /// Write one observation file per noise level.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
    },
    /// Fit the model to one observation.
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        observation: PathBuf,
        /// Initial guess; defaults to the first of `initial_guesses`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
    },
    /// Run every initial guess on every noise level; resumes an interrupted run.
    Campaign {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
    },
    /// Convert traces into plot-ready CSVs.
    Report {
        /// A trace CSV or a directory searched for traces.
        input: PathBuf,
        /// Defaults to `<input directory>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = thread_count().and_then(|threads| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| CliError::Run(e.to_string()))?;
        pool.install(|| commands::dispatch(cli.command))
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
