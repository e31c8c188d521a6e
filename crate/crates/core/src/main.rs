use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use concept_forge::config::{PipelineConfig, SCORER_URL_ENV};
use concept_forge::pipeline::{self, Command};

#[derive(Parser)]
#[command(name = "concept-forge", version, about = "Concept co-occurrence link prediction and idea quintuple pipeline")]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true, default_value = "concept-forge.toml")]
    config: PathBuf,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random stream; overrides the config seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Build the evolving concept graph (graph.json).
    BuildGraph,
    /// Generate link-prediction samples (samples.jsonl).
    Sample,
    /// Extract, bind, filter and split quintuples (quintuples.jsonl, splits.json).
    Quintuples,
    /// Score candidates and forecast the test snapshot (prediction.json).
    Predict,
    /// Compare the prediction with the true snapshot (metrics.json, metrics.csv).
    Evaluate,
    /// Verbalize test quintuples and compute text metrics (analysis.json).
    Analyze,
    /// Run every stage in order.
    All,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::BuildGraph => Command::BuildGraph,
            Cmd::Sample => Command::Sample,
            Cmd::Quintuples => Command::Quintuples,
            Cmd::Predict => Command::Predict,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Analyze => Command::Analyze,
            Cmd::All => Command::All,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match PipelineConfig::load(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    cfg.apply_overrides(cli.out, cli.seed, std::env::var(SCORER_URL_ENV).ok());
    let mut stdout = std::io::stdout().lock();
    match pipeline::run(&cfg, cli.command.into(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
