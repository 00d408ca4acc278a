mod config;
mod run;
mod spectrum;
mod theory;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "lossjump", version, about = "Loss-switch PINN experiments and frequency-domain kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a config (or a manifest.json) and write metrics, spectra, snapshots and checkpoints.
    Run(run::RunArgs),
    /// Tabulate the simplified kernels and the ξⁿcsch²ξ family.
    Theory(theory::TheoryArgs),
    /// Recompute error spectra from a run's snapshots.
    Spectrum(spectrum::SpectrumArgs),
    /// Run the fast invariant suite; the exit code is the number of failures.
    Check {
        /// Use a tanh with a perturbed second derivative.
        #[arg(long)]
        inject_fault: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid input; exit 2.
    Config(String),
    /// Non-finite loss; exit 3.
    Aborted {
        message: String,
        checkpoint: Option<PathBuf>,
    },
    Runtime(String),
}

impl CliError {
    pub fn from_core(e: lossjump::Error) -> Self {
        use lossjump::Error as E;
        match e {
            E::Config(_) | E::DimensionMismatch { .. } | E::ShapeMismatch(_) | E::UnsupportedOrder(_) => {
                CliError::Config(e.to_string())
            }
            E::Aborted { .. } => CliError::Aborted {
                message: e.to_string(),
                checkpoint: None,
            },
            other => CliError::Runtime(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Aborted { .. } => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Aborted { message, checkpoint } => {
                write!(f, "{message}")?;
                if let Some(p) = checkpoint {
                    write!(f, "\nlast checkpoint: {}", p.display())?;
                }
                Ok(())
            }
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

fn check(fault: bool) -> ExitCode {
    let results = lossjump::checks::run_fast_checks(fault);
    let mut failed = 0u8;
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        failed += (!r.passed) as u8;
    }
    ExitCode::from(failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run::run(a),
        Command::Theory(a) => theory::theory(a),
        Command::Spectrum(a) => spectrum::spectrum(a),
        Command::Check { inject_fault } => return check(inject_fault),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
