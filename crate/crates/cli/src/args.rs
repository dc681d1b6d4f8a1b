//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::VanillaKind;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "strongwalk", version, about = "Nested random walks, binomial markets and their continuous limits")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Comma-separated seeds, e.g. `1,2,3`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    #[command(subcommand)]
    pub command: Command,
}

/// Market parameters; each falls back to the config file, then to the
/// defaults μ = 0.1, σ = 0.2, r = 0.05, s0 = 100, T = 1.
#[derive(Debug, Clone, Default, Args)]
pub struct MarketArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub s0: Option<f64>,
    /// Horizon T.
    #[arg(long, visible_alias = "T")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ClaimArgs {
    #[arg(long, value_enum, default_value = "call")]
    pub claim: VanillaKind,
    /// Strike; defaults to s0.
    #[arg(long, visible_alias = "K")]
    pub strike: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nested walks: the level-m path and refinement checks below it.
    Walk(WalkArgs),
    /// Level parameters, and optionally an asset path.
    Market(MarketCmd),
    /// Lattice and closed-form prices at one node.
    Price(PriceCmd),
    /// Pathwise replication of a vanilla claim.
    Hedge(HedgeCmd),
    /// Mollified put against the raw put.
    Smooth(SmoothCmd),
    /// Discrete Feynman–Kac solvers.
    Fk(FkCmd),
    /// Convergence study over levels and seeds.
    Study(StudyCmd),
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    #[arg(long, default_value_t = 4)]
    pub m: u32,
    /// Defaults to the first entry of the seed list.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, visible_alias = "T")]
    pub horizon: Option<f64>,
    /// Omit the path and print only the refinement checks.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Args)]
pub struct MarketCmd {
    #[command(flatten)]
    pub market: MarketArgs,
    #[arg(long, default_value_t = 4)]
    pub m: u32,
    /// Also print the asset path driven by this seed.
    #[arg(long)]
    pub path: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PriceCmd {
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub claim: ClaimArgs,
    #[arg(long, default_value_t = 4)]
    pub m: u32,
    /// Time step of the node.
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Spot at the node; defaults to s0.
    #[arg(long)]
    pub x: Option<f64>,
    /// Print the whole backward-induction surface instead.
    #[arg(long)]
    pub dump_surface: bool,
}

#[derive(Debug, Args)]
pub struct HedgeCmd {
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub claim: ClaimArgs,
    #[arg(long, default_value_t = 4)]
    pub m: u32,
    /// Number of paths, seeded `seed, seed + 1, ...`; ignored with --seed-list.
    #[arg(long, default_value_t = 1)]
    pub paths: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Include the per-step ledgers.
    #[arg(long)]
    pub ledger: bool,
}

#[derive(Debug, Args)]
pub struct SmoothCmd {
    #[command(flatten)]
    pub market: MarketArgs,
    #[arg(long, visible_alias = "K")]
    pub strike: Option<f64>,
    #[arg(long, default_value_t = 6)]
    pub m: u32,
    /// Smoothing indices; defaults to the smallest n with n³ ≥ 4^m.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u32>>,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Spots; defaults to s0.
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    /// Constant in the band condition of the hedge schedule.
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FkMode {
    Forward,
    Backward,
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Auto,
    Tree,
    Lattice,
    Mc,
}

#[derive(Debug, Args)]
pub struct FkCmd {
    #[arg(long, value_enum)]
    pub mode: FkMode,
    /// JSON problem file; without one, backward mode solves the pricing
    /// problem of the market.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub claim: ClaimArgs,
    #[arg(long, default_value_t = 3)]
    pub m: u32,
    /// Time step (backward, residual) or depth (forward).
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    /// Smoothing index of the put in residual mode.
    #[arg(long, default_value_t = 8)]
    pub n: u32,
    #[arg(long)]
    pub tree_cap: Option<usize>,
    /// Zero disables Monte Carlo.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    pub strategy: StrategyArg,
}

#[derive(Debug, Args)]
pub struct StudyCmd {
    #[command(flatten)]
    pub market: MarketArgs,
    #[arg(long, value_enum)]
    pub claim: Option<VanillaKind>,
    #[arg(long, visible_alias = "K")]
    pub strike: Option<f64>,
    #[arg(long)]
    pub m_lo: Option<u32>,
    #[arg(long)]
    pub m_hi: Option<u32>,
    #[arg(long)]
    pub m_ref: Option<u32>,
    /// Distance to maturity left out of time grids.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub time_points: Option<usize>,
}
