//! JSON configuration shared by all subcommands.
//!
//! ```json
//! {
//!   "market": {"mu": 0.1, "sigma": 0.2, "r": 0.05, "s0": 100.0, "T": 1.0},
//!   "claim": {"kind": "call", "K": 100.0},
//!   "m_lo": 4, "m_hi": 9, "seeds": [1, 2, 3],
//!   "delta": 0.1, "m_ref": 12, "m_cap": 12
//! }
//! ```
//!
//! Every field is optional. Subcommands other than `study` only read the
//! `market` block, and their flags take precedence over it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use strongwalk_core::feynman_kac::DEFAULT_TREE_CAP;
use strongwalk_core::market::{build_level, MarketParams};

use crate::error::CliError;
use crate::output::Format;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSpec {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub s0: f64,
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: f64,
}

impl Default for MarketSpec {
    fn default() -> Self {
        MarketSpec { mu: 0.1, sigma: 0.2, r: 0.05, s0: 100.0, horizon: 1.0 }
    }
}

impl MarketSpec {
    pub fn params(&self) -> Result<MarketParams, CliError> {
        MarketParams::new(self.mu, self.sigma, self.r, self.s0, self.horizon).map_err(|e| CliError::config(format!("market: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VanillaKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyClaim {
    pub kind: VanillaKind,
    /// Defaults to the initial price.
    #[serde(rename = "K", default)]
    pub strike: Option<f64>,
}

impl Default for StudyClaim {
    fn default() -> Self {
        StudyClaim { kind: VanillaKind::Call, strike: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub market: MarketSpec,
    pub claim: StudyClaim,
    pub m_lo: u32,
    pub m_hi: u32,
    pub seeds: Vec<u64>,
    /// Distance to maturity excluded from time grids; defaults to `0.1·T`.
    pub delta: Option<f64>,
    pub format: Format,
    pub tree_cap: usize,
    pub mc_samples: usize,
    /// Level standing in for the continuous limit.
    pub m_ref: u32,
    /// Hard upper bound on every level used.
    pub m_cap: u32,
    /// Smoothing index of the put used for the residual metric.
    pub smoothing_n: u32,
    /// Number of points in the time grid on `[0, T - delta]`.
    pub time_points: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            market: MarketSpec::default(),
            claim: StudyClaim::default(),
            m_lo: 4,
            m_hi: 9,
            seeds: (1..=20).collect(),
            delta: None,
            format: Format::Csv,
            tree_cap: DEFAULT_TREE_CAP,
            mc_samples: 100_000,
            m_ref: 12,
            m_cap: 12,
            smoothing_n: 8,
            time_points: 10,
        }
    }
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn strike(&self) -> f64 {
        self.claim.strike.unwrap_or(self.market.s0)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.1 * self.market.horizon)
    }

    /// Checks every field and names the first one that is wrong.
    pub fn validate(&self) -> Result<MarketParams, CliError> {
        let params = self.market.params()?;
        if self.m_lo > self.m_hi {
            return Err(CliError::config(format!("m_lo..m_hi: empty level range {}..{}", self.m_lo, self.m_hi)));
        }
        if self.m_hi > self.m_cap {
            return Err(CliError::config(format!("m_hi: {} exceeds the hard cap {}", self.m_hi, self.m_cap)));
        }
        if self.m_ref <= self.m_hi {
            return Err(CliError::config(format!("m_ref: {} must exceed m_hi = {}", self.m_ref, self.m_hi)));
        }
        if self.m_ref > self.m_cap.max(12) {
            return Err(CliError::config(format!("m_ref: {} exceeds the hard cap {}", self.m_ref, self.m_cap.max(12))));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds: at least one seed is required"));
        }
        if !(self.strike() > 0.0) {
            return Err(CliError::config("claim.K: strike must be positive"));
        }
        let delta = self.delta();
        if !(delta > 0.0 && delta < params.horizon) {
            return Err(CliError::config("delta: must lie in (0, T)"));
        }
        if self.smoothing_n == 0 {
            return Err(CliError::config("smoothing_n: must be at least 1"));
        }
        if self.time_points == 0 {
            return Err(CliError::config("time_points: must be at least 1"));
        }
        if let Err(e) = build_level(&params, self.m_lo) {
            return Err(CliError::config(format!("m_lo: {e}")));
        }
        Ok(params)
    }
}
