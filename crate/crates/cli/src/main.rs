use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlproj::lp::{ClusterBy, Criterion, Penalty};
use nlproj_cli::{run, CliError, Overrides, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "nlproj", version, about = "Linear and non-linear panel local projections")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_parser = ["aic", "bic"])]
    criterion: Option<String>,

    /// Sample window, YYYY-MM:YYYY-MM.
    #[arg(long, global = true)]
    window: Option<String>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_parser = ["paper", "coefficients"])]
    penalty: Option<String>,

    #[arg(long, global = true, value_parser = ["country", "month"])]
    cluster: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Identify the shocks, or pass precomputed shocks through.
    Identify,
    /// Select lag orders, fit the local projections and draw the figures.
    Estimate,
    /// Build the six significance tables from stored fits.
    Infer,
    /// Descriptive statistics and symmetry tests of the shocks.
    Symmetry,
    /// Simulate the structural model and its oracle responses.
    Simulate,
    /// Every stage in order.
    RunAll,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = PipelineConfig::load(&path)?;
    let parse_err = |e: nlproj::Error| CliError::Config(e.to_string());
    cfg.apply(Overrides {
        seed: cli.seed,
        criterion: cli.criterion.map(|s| s.parse::<Criterion>()).transpose().map_err(parse_err)?,
        window: cli.window,
        out: cli.out,
        penalty: cli.penalty.map(|s| s.parse::<Penalty>()).transpose().map_err(parse_err)?,
        cluster: cli.cluster.map(|s| s.parse::<ClusterBy>()).transpose().map_err(parse_err)?,
    })?;
    let stage = match cli.command {
        Command::Identify => Stage::Identify,
        Command::Estimate => Stage::Estimate,
        Command::Infer => Stage::Infer,
        Command::Symmetry => Stage::Symmetry,
        Command::Simulate => Stage::Simulate,
        Command::RunAll => Stage::RunAll,
    };
    run(stage, &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
