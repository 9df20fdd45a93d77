use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{ArgAction, Parser, Subcommand};

use dpc_cli::config::{EffectiveConfig, FileConfig, Overrides};
use dpc_cli::pipeline;

/// Displacement photon counter: theory curves, click simulation, POVM
/// tomography, evaluation, and repetition sweeps.
#[derive(Debug, Parser)]
#[command(name = "dpc", version)]
struct Cli {
    /// Displacement amplitude; repeat the flag for the sweep list
    #[arg(
        long = "beta",
        global = true,
        value_name = "BETA",
        allow_negative_numbers = true,
        action = ArgAction::Append
    )]
    beta: Vec<f64>,
    /// Shots per probe state
    #[arg(long, global = true, value_name = "N")]
    shots: Option<u64>,
    /// Repetitions per sweep cell
    #[arg(long, global = true, value_name = "N")]
    reps: Option<u32>,
    /// Fock-space truncation dimension
    #[arg(long, global = true, value_name = "D")]
    dim: Option<usize>,
    /// Interference visibility of the displacement, in [0, 1]
    #[arg(long, global = true, value_name = "V")]
    visibility: Option<f64>,
    /// Dark-count probability per gate, in [0, 1)
    #[arg(long = "dark-prob", global = true, value_name = "P")]
    dark_prob: Option<f64>,
    /// Master seed for the click simulation
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// TOML config file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form error-rate curves over a displacement grid
    Theory,
    /// Monte Carlo click counts for the probe ensemble
    Simulate,
    /// Maximum-likelihood POVM reconstruction from a frequency CSV
    Reconstruct {
        /// Frequency CSV produced by `simulate`
        input: PathBuf,
    },
    /// Discrimination error and fidelity of a stored POVM
    Evaluate {
        /// POVM JSON produced by `reconstruct`
        input: PathBuf,
    },
    /// Simulate, reconstruct, and evaluate over the displacement list
    Sweep,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = cli.config.as_deref().map(FileConfig::load).transpose()?;
    let flags = Overrides {
        betas: cli.beta,
        shots: cli.shots,
        reps: cli.reps,
        dim: cli.dim,
        visibility: cli.visibility,
        dark_prob: cli.dark_prob,
        seed: cli.seed,
        out: cli.out,
    };
    let cfg = EffectiveConfig::resolve(file, flags)?;

    match cli.command {
        Command::Theory => {
            let path = pipeline::run_theory(&cfg)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate => {
            let path = pipeline::run_simulate(&cfg)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Reconstruct { input } => {
            let artifacts = pipeline::run_reconstruct(&cfg, &input)?;
            println!(
                "wrote {}, {}, {}",
                artifacts.povm.display(),
                artifacts.povm_qubit.display(),
                artifacts.report.display()
            );
            if artifacts.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("reconstruction hit the iteration cap; partial result retained");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Evaluate { input } => {
            let path = pipeline::run_evaluate(&cfg, &input)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep => {
            let outcome = pipeline::run_sweep(&cfg)?;
            println!("wrote {}", outcome.csv.display());
            if outcome.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} sweep cell(s) failed; see sweep_failures.txt", outcome.failures.len());
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
