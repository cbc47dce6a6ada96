//! `voltvar`: build datasets, train equilibrium functions, check the
//! stability bound, simulate and compare controllers.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig, StepSize};

#[derive(Debug, Parser)]
#[command(name = "voltvar", version, about = "Learned local Volt/Var control pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Weight of the voltage-deviation term, in [0, 1].
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Stepsize in (0, 1], or `auto`.
    #[arg(long, global = true)]
    epsilon: Option<StepSize>,

    /// Half-width of the multiplicative measurement noise.
    #[arg(long, global = true)]
    noise: Option<f64>,

    /// incremental, non_incremental, droop_standard, droop_optimized or none.
    #[arg(long, global = true)]
    controller: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize the daily load/solar profile of the feeder.
    Profiles,
    /// Solve the ORPF over the training scenarios and write per-DER datasets.
    BuildDataset,
    /// Fit one monotone equilibrium function per DER.
    Train,
    /// Report Lipschitz constants and the stepsize bound.
    Bound,
    /// Run the controller over the evaluation day.
    Simulate,
    /// Tabulate day-average distances of all simulated runs.
    Evaluate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Some(path) = &cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let overrides = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        alpha: cli.alpha,
        epsilon: cli.epsilon,
        noise: cli.noise,
        controller: cli.controller.clone(),
    };
    let result = RunConfig::load(path, &overrides).and_then(|config| match cli.command {
        Command::Profiles => commands::profiles(&config),
        Command::BuildDataset => commands::build_dataset(&config),
        Command::Train => commands::train(&config),
        Command::Bound => commands::bound(&config),
        Command::Simulate => commands::simulate(&config),
        Command::Evaluate => commands::evaluate(&config),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
