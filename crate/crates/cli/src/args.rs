use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polywalk_core::WalkKind;

#[derive(Debug, Parser)]
#[command(name = "polywalk", version, about = "Random portfolios over convex bodies")]
pub struct Cli {
    /// Raise log verbosity (-v info, -vv debug). Logs go to stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw points from a convex body with a geometric random walk.
    Sample(SampleArgs),
    /// Exact CDF of a linear portfolio statistic under flat Dirichlet weights.
    Cdf(CdfArgs),
    /// Bring a body into near-isotropic position and print the transform.
    Round(RoundArgs),
    /// Convergence diagnostics for a sample file.
    Diagnose(DiagnoseArgs),
    /// Rebalanced random-portfolio backtest.
    Backtest(BacktestArgs),
    /// Generate a synthetic factor market.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Body JSON with keys A, b, Aeq, beq, E, c.
    #[arg(long)]
    pub body: PathBuf,
    /// `flat`, a density JSON file, or inline density JSON.
    #[arg(long, default_value = "flat")]
    pub target: String,
    #[arg(long, value_parser = parse_walk)]
    pub walk: Option<WalkKind>,
    /// Walk configuration JSON; command-line flags take precedence.
    #[arg(long)]
    pub walk_config: Option<PathBuf>,
    /// Number of draws over all chains.
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON run summary with acceptance rates and diagnostics.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Exit with status 4 when the diagnostics gate fails.
    #[arg(long)]
    pub gate: bool,
}

#[derive(Debug, Args)]
pub struct CdfArgs {
    /// Asset values: JSON `{z, gammas}` or a bare array, as a file or inline.
    #[arg(long)]
    pub z: String,
    /// Grid `start:end:step` or a comma-separated list; overrides `gammas` in the input.
    #[arg(long)]
    pub gammas: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for uniformity; the exact CDF uses no randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RoundArgs {
    #[arg(long)]
    pub body: PathBuf,
    #[arg(long, default_value = "flat")]
    pub target: String,
    #[arg(long, default_value_t = 10)]
    pub max_phases: usize,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// CSV written by `sample` (a `chain` column followed by coordinates).
    #[arg(long)]
    pub samples: PathBuf,
    /// Dimension used for the ESS threshold; defaults to the coordinate count.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for uniformity; diagnostics use no randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QuintileWeighting {
    Equal,
    Cap,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Backtest configuration TOML.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory with returns.csv, scores.csv, benchmark.csv and sectors.csv.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_parser = parse_walk)]
    pub walk: Option<WalkKind>,
    /// Also run the quintile baseline with this weighting.
    #[arg(long, value_enum)]
    pub quintiles: Option<QuintileWeighting>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the market CSVs.
    #[arg(long)]
    pub out: PathBuf,
    /// Synthetic market TOML; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub assets: Option<usize>,
    #[arg(long)]
    pub years: Option<f64>,
    /// Daily premium per unit score, `factor=value`; repeatable.
    #[arg(long = "premium", value_parser = parse_premium)]
    pub premia: Vec<(String, f64)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_walk(s: &str) -> Result<WalkKind, String> {
    s.parse::<WalkKind>().map_err(|e| e.to_string())
}

fn parse_premium(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected factor=value, got {s:?}"))?;
    let v: f64 = value.parse().map_err(|e| format!("premium {value:?}: {e}"))?;
    Ok((name.to_string(), v))
}
