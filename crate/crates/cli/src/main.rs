use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use conecs_cli::{commands, LoadedConfig, RunContext};
use conecs_core::lp::DEFAULT_LP_TOL;
use conecs_core::recovery::DEFAULT_SUCCESS_TOL;

#[derive(Parser)]
#[command(name = "conecs", version, about = "Weighted l1 recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the estimators; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Relative error below which a recovery counts as a success.
    #[arg(long, global = true, default_value_t = DEFAULT_SUCCESS_TOL)]
    success_tol: f64,
    /// KKT tolerance of the LP solver.
    #[arg(long, global = true, default_value_t = DEFAULT_LP_TOL)]
    lp_tol: f64,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Designed weights from the marginals: weights.csv.
    Weights,
    /// Intrinsic-volume estimates: volumes.csv.
    Volumes,
    /// Recovery frequencies over the m grid: phase.csv, predicted.csv.
    Phase,
    /// Steepest descent on the weights: trajectory.csv, final_weights.csv.
    Descend,
    /// Per-support statistical dimensions: deltahist.csv, deltaclusters.csv.
    Histogram,
}

fn run(cli: Cli) -> Result<()> {
    let path = cli.config.context("--config is required")?;
    let config = LoadedConfig::from_file(&path)?;
    let ctx = RunContext::new(config, cli.seed, cli.out, cli.success_tol, cli.lp_tol)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build()?;
    pool.install(|| match cli.command {
        Command::Weights => commands::weights(&ctx).map(|_| ()),
        Command::Volumes => commands::volumes(&ctx).map(|_| ()),
        Command::Phase => commands::phase(&ctx).map(|_| ()),
        Command::Descend => commands::descend_cmd(&ctx).map(|_| ()),
        Command::Histogram => commands::histogram(&ctx).map(|_| ()),
    })
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        log::error!("{e:#}");
        std::process::exit(1);
    }
}
