use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scorelab::error::Error;
use scorelab::experiment::{Experiment, ExperimentConfig, Stage};

#[derive(Parser)]
#[command(name = "scorelab", version, about = "Scorecard technique comparison on synthetic or external portfolios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage.
    Run(Common),
    /// Generate or load the dataset and record the partition.
    Generate(Common),
    /// Fit the binning map on the training rows.
    Bin(Common),
    /// Pre-select candidates and search the best subsets.
    Select(Common),
    /// Estimate every planned model and compute its criteria.
    Fit(Common),
    /// Rank techniques and write the head-to-head scatter.
    Assess(Common),
    /// Regenerate the assessment files and the text report.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated techniques, e.g. `LOG,NBM`.
    #[arg(long, value_delimiter = ',')]
    techniques: Option<Vec<String>>,
    /// Desk-scale preset: small portfolio, sizes 3..5, top 10.
    #[arg(long)]
    desk_scale: bool,
}

fn experiment(c: &Common) -> Result<Experiment, Error> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if c.desk_scale {
        cfg = cfg.desk_scale();
    }
    if let Some(seed) = c.seed {
        cfg.data.seed = seed;
    }
    if let Some(t) = &c.techniques {
        cfg.techniques = t.iter().map(|s| s.trim().to_string()).collect();
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("scorelab-out"));
    Ok(Experiment::new(cfg.settings()?, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, stage) = match &cli.command {
        Command::Run(c) => (c, None),
        Command::Generate(c) => (c, Some(Stage::Generate)),
        Command::Bin(c) => (c, Some(Stage::Bin)),
        Command::Select(c) => (c, Some(Stage::Select)),
        Command::Fit(c) => (c, Some(Stage::Fit)),
        Command::Assess(c) => (c, Some(Stage::Assess)),
        Command::Report(c) => (c, Some(Stage::Report)),
    };
    let result = experiment(common).and_then(|e| match stage {
        Some(s) => e.run_stage(s),
        None => e.run(),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Stage { .. } => eprintln!("error: {e}"),
                _ => eprintln!("error: configuration: {e}"),
            }
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
