//! Command-line front end: configure, run, and serialize simulated
//! three-state QKD experiments.
//!
//! Exit codes: 0 on success, 1 on configuration or validation failures
//! (with a diagnostic on stderr), 2 on command-line usage errors (clap's
//! convention).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ipognac_sim::config::ExperimentConfig;
use ipognac_sim::harness::{compare_encoders, run_experiment, simulate_states, sweep_experiment};
use ipognac_sim::report::{
    write_compare_csv, write_run_report, write_states_csv, write_sweep_csv,
};

/// Environment variable naming a default config file, used when `--config`
/// is not given.
const CONFIG_ENV: &str = "IPOGNAC_CONFIG";

#[derive(Parser)]
#[command(
    name = "ipognac",
    about = "Simulator for a self-compensating Sagnac polarization encoder \
             and its three-state QKD proof of concept",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args)]
struct CommonArgs {
    /// Config file (flat `key = value` lines); defaults to $IPOGNAC_CONFIG
    /// if set, else built-in defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Random seed; overrides `run.seed` from the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Config override of the form key=value; repeatable, applied after
    /// the file in order.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the emitted Jones and Stokes parameters for the configured
    /// state pattern.
    SimulateStates(CommonArgs),
    /// Run the full protocol and emit the QBER time-series CSV plus a
    /// summary block.
    RunQkd(CommonArgs),
    /// Run once per value of `sweep.key` over `sweep.values` and emit one
    /// CSV row per point.
    Sweep(CommonArgs),
    /// Run the identical protocol with each encoder variant and emit the
    /// comparison table.
    Compare(CommonArgs),
}

fn load_config(args: &CommonArgs) -> ipognac_sim::Result<ExperimentConfig> {
    let path = args
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_text(&std::fs::read_to_string(&p)?),
        None => Ok(ExperimentConfig::default()),
    }?;
    for expr in &args.overrides {
        cfg.apply_override(expr)?;
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(args: &CommonArgs, text: &str) -> ipognac_sim::Result<()> {
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> ipognac_sim::Result<()> {
    let (args, text) = match &cli.command {
        Command::SimulateStates(args) => {
            let cfg = load_config(args)?;
            (args, write_states_csv(&simulate_states(&cfg)?))
        }
        Command::RunQkd(args) => {
            let cfg = load_config(args)?;
            (args, write_run_report(&run_experiment(&cfg)?))
        }
        Command::Sweep(args) => {
            let cfg = load_config(args)?;
            (args, write_sweep_csv(&sweep_experiment(&cfg)?))
        }
        Command::Compare(args) => {
            let cfg = load_config(args)?;
            (args, write_compare_csv(&compare_encoders(&cfg)?))
        }
    };
    emit(args, &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
