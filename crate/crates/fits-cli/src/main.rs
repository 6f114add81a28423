//! `fits` — analysis, training, and energy accounting for
//! frequency-selective spiking neurons, driven by strict JSON config
//! documents and emitting machine-readable CSV/JSON artifacts.
//!
//! Every subcommand reads one JSON document (`--config`), writes its
//! artifacts under one directory (`--out`), and is deterministic: the
//! same document and seed produce byte-identical outputs, except for
//! the `meta.generated_unix` field of `summary.json`, which is the only
//! timestamp anywhere.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags,
//! malformed or non-strict config, unreadable inputs), 3 for numeric
//! failures on valid inputs (divergence, near-pole evaluation,
//! ambiguous phase unwrap).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fits_core::Error;

use crate::config::Ctx;

#[derive(Parser)]
#[command(
    name = "fits",
    version,
    about = "Frequency-selective spiking neurons: analysis, stability, training, and energy accounting"
)]
struct Cli {
    /// JSON config document for the subcommand (strict schema: unknown
    /// keys are rejected, all violations reported at once).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory where CSV/JSON artifacts are written (created if absent).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Overrides the seed found in the config, where the subcommand uses one.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Caps the worker-thread count; results are identical at any cap.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transfer-function curves and realized target frequencies for an
    /// inline neuron or every neuron of a checkpoint.
    Analyze,
    /// Continuous- vs discrete-time target fidelity over a log grid.
    Ctdt,
    /// Jury margins, coupling bounds, and maximum stable target
    /// frequencies for both discretization schemes.
    Stability,
    /// Generate the synthetic frequency-discrimination dataset.
    GenData,
    /// Train a network on a generated dataset; writes a checkpoint.
    Train,
    /// Evaluate a checkpoint on a dataset split.
    Eval,
    /// Perturb a checkpoint's learned frequencies (shuffle or reset) and
    /// re-evaluate.
    Perturb,
    /// Count operations and estimate energy on a dataset split.
    Energy,
    /// Dump learned parameter distributions of a checkpoint as CSV.
    DumpParams,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(cli: Cli) -> fits_core::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".to_string()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {n} worker threads: {e}")))?;
    }
    let ctx = Ctx::prepare(cli.config, cli.out, cli.seed)?;
    match cli.command {
        Command::Analyze => commands::analyze::run(&ctx),
        Command::Ctdt => commands::ctdt::run(&ctx),
        Command::Stability => commands::stability::run(&ctx),
        Command::GenData => commands::gen_data::run(&ctx),
        Command::Train => commands::train::run(&ctx),
        Command::Eval => commands::eval::run(&ctx),
        Command::Perturb => commands::perturb::run(&ctx),
        Command::Energy => commands::energy::run(&ctx),
        Command::DumpParams => commands::dump_params::run(&ctx),
    }
}
