use std::path::PathBuf;
use std::process::ExitCode;

use bias_audit::pipeline::{Overrides, PipelineConfig, Runner, Stage};
use clap::{Parser, ValueEnum};
use tracing_subscriber::EnvFilter;

/// Statement-bias audit of a news outlet's party coverage.
#[derive(Debug, Parser)]
#[command(name = "audit", version)]
struct Cli {
    /// Stage to run.
    #[arg(value_enum)]
    stage: StageArg,
    /// Pipeline config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Global seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Stage 2 spending cap in USD; overrides `stage2.budget.max_usd`.
    #[arg(long)]
    budget_usd: Option<f64>,
    /// Use the offline mock LLM instead of the configured provider.
    #[arg(long)]
    dry_run: bool,
    /// Review sample size; overrides `review.sample_size`.
    #[arg(long)]
    n: Option<usize>,
    /// Re-run stages even if their inputs are unchanged.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Harvest,
    Extract,
    Stage1,
    Stage2,
    Analyze,
    ReviewSample,
    All,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Harvest => Stage::Harvest,
            StageArg::Extract => Stage::Extract,
            StageArg::Stage1 => Stage::Stage1,
            StageArg::Stage2 => Stage::Stage2,
            StageArg::Analyze => Stage::Analyze,
            StageArg::ReviewSample => Stage::ReviewSample,
            StageArg::All => Stage::All,
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("audit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), bias_audit::PipelineError> {
    let overrides = Overrides {
        seed: cli.seed,
        budget_usd: cli.budget_usd,
        dry_run: cli.dry_run,
        review_n: cli.n,
    };
    let loaded = PipelineConfig::load(&cli.config, &overrides)?;
    let runner = Runner::new(loaded).force(cli.force);
    for report in runner.run(cli.stage.into())? {
        let counts: Vec<String> = report.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let status = if report.skipped { " (unchanged)" } else { "" };
        println!("{}{status}: {}", report.stage, counts.join(" "));
    }
    Ok(())
}
