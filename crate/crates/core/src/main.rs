use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chaos_tomography::runner::{
    parse_config_for, run_experiment, ConfigError, Experiment, RunnerError,
};

/// Chaos-assisted state tomography experiments.
#[derive(Parser)]
#[command(name = "chaos-tomo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stroboscopic (Y, Z) section of the classical kicked top.
    PhasePortrait(Common),
    /// Mean reconstruction fidelity against kick number for several λ.
    FidelitySweep(Common),
    /// Covariance entropy against kick number.
    EntropySweep(Common),
    /// Collective Fisher information against kick number.
    FisherSweep(Common),
    /// A single chaotic map against a random-matrix ensemble average.
    EnsembleCompare(Common),
    /// Closed-form entropy predictions with empirical companions.
    AnalyticTable(Common),
}

#[derive(Args)]
struct Common {
    /// Flat JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Self::PhasePortrait(c) => (Experiment::PhasePortrait, c),
            Self::FidelitySweep(c) => (Experiment::FidelitySweep, c),
            Self::EntropySweep(c) => (Experiment::EntropySweep, c),
            Self::FisherSweep(c) => (Experiment::FisherSweep, c),
            Self::EnsembleCompare(c) => (Experiment::EnsembleCompare, c),
            Self::AnalyticTable(c) => (Experiment::AnalyticTable, c),
        }
    }
}

fn run(experiment: Experiment, args: Common) -> Result<(), RunnerError> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| ConfigError {
            field: None,
            line: None,
            column: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?,
        None => "{}".to_owned(),
    };
    let mut config = parse_config_for(&text, Some(experiment))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.workers == Some(0) {
        return Err(ConfigError {
            field: Some("workers".into()),
            line: None,
            column: None,
            message: "must be at least 1".into(),
        }
        .into());
    }
    let out = args
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let output = run_experiment(&config, &out, args.workers)?;
    for check in &output.summary.checks {
        println!(
            "{} {}: empirical {}{}",
            if check.pass { "PASS" } else { "FAIL" },
            check.name,
            check.empirical,
            check
                .analytic
                .map(|a| format!(", analytic {a}"))
                .unwrap_or_default(),
        );
    }
    println!("wrote {}", output.csv_path.display());
    println!("wrote {}", output.summary_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = cli.command.split();
    match run(experiment, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
