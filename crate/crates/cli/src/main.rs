//! `cvbm` command-line interface.
//!
//! Every command reads one JSON run config; flags are reserved for file
//! paths, sweep lists, and seed overrides. Exit codes: 0 success, 1 runtime
//! failure, 2 config/validation failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn validation_from(e: cvbm::Error) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn runtime_from(e: cvbm::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "cvbm", about = "Continuous-variable Born machine toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a circuit against the configured target distribution.
    Train {
        config: PathBuf,
    },
    /// Draw homodyne samples from a checkpointed circuit.
    Sample {
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute the unbiased MMD between two sample CSV files.
    Mmd {
        config: PathBuf,
        file_a: PathBuf,
        file_b: PathBuf,
    },
    /// Verify parameter-shift gradients against finite differences of the
    /// exact loss.
    GradCheck {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the kernel Gram matrix of a sample file (CSV, no header).
    KernelGram {
        config: PathBuf,
        samples: PathBuf,
        out: PathBuf,
    },
    /// Train once per transmissivity per seed and tabulate final losses.
    NoiseSweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        transmissivities: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
}

fn configure_threads() {
    if let Ok(v) = std::env::var("CVBM_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { config } => commands::cmd_train(config),
        Command::Sample { checkpoint, out, count, seed } => {
            commands::cmd_sample(checkpoint, *count, *seed, out)
        }
        Command::Mmd { config, file_a, file_b } => commands::cmd_mmd(config, file_a, file_b),
        Command::GradCheck { config, out } => commands::cmd_grad_check(config, out.as_deref()),
        Command::KernelGram { config, samples, out } => {
            commands::cmd_kernel_gram(config, samples, out)
        }
        Command::NoiseSweep { config, transmissivities, seeds } => {
            commands::cmd_noise_sweep(config, transmissivities, *seeds)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
