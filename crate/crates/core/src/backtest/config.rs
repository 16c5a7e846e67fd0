use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::ConstraintSpec;
use crate::walks::{WalkConfig, WalkKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Monthly,
    Quarterly,
}

/// Sampling distribution over the feasible set at each rebalance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetChoice {
    Uniform,
    /// `Dirichlet(scale * benchmark)`: centered on the benchmark, with mass
    /// pushed towards the boundary when the parameters sum to less than the
    /// number of assets.
    BenchmarkDirichlet {
        #[serde(default = "unit")]
        scale: f64,
    },
}

fn unit() -> f64 {
    1.0
}

/// Momentum as the cumulative return over `window` days, skipping the most recent `skip`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumWindow {
    #[serde(default = "default_mom_window")]
    pub window: usize,
    #[serde(default = "default_mom_skip")]
    pub skip: usize,
}

fn default_mom_window() -> usize {
    252
}

fn default_mom_skip() -> usize {
    21
}

impl Default for MomentumWindow {
    fn default() -> Self {
        Self { window: default_mom_window(), skip: default_mom_skip() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    /// Portfolios per rebalance, one concatenated path each.
    pub k: usize,
    /// Factor whose score orders the concatenation.
    pub sort_factor: String,
    #[serde(default = "monthly")]
    pub rebalance: Schedule,
    #[serde(default)]
    pub start: Option<NaiveDate>,
    #[serde(default)]
    pub end: Option<NaiveDate>,
    /// Trading days of history for the covariance estimate.
    #[serde(default = "default_lookback")]
    pub lookback_days: usize,
    /// Derive a `momentum` score from returns when set.
    #[serde(default)]
    pub momentum: Option<MomentumWindow>,
    #[serde(default = "yes")]
    pub winsorize: bool,
    /// Standardize scores within sectors rather than across the universe.
    #[serde(default)]
    pub sector_neutral_scores: bool,
    #[serde(default = "default_chains")]
    pub chains: usize,
    /// Draws per rebalance before thinning to `k`; default `max(4 k, 20 d, 250 chains)`.
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default = "default_walk")]
    pub walk: WalkConfig,
    #[serde(default = "default_target")]
    pub target: TargetChoice,
    #[serde(default)]
    pub constraints: ConstraintSpec,
    #[serde(default)]
    pub seed: u64,
}

fn monthly() -> Schedule {
    Schedule::Monthly
}

fn default_lookback() -> usize {
    1260
}

fn yes() -> bool {
    true
}

fn default_chains() -> usize {
    4
}

fn default_walk() -> WalkConfig {
    WalkConfig::new(WalkKind::Biw)
}

fn default_target() -> TargetChoice {
    TargetChoice::Uniform
}

impl BacktestConfig {
    pub fn new(k: usize, sort_factor: &str) -> Self {
        Self {
            k,
            sort_factor: sort_factor.to_string(),
            rebalance: Schedule::Monthly,
            start: None,
            end: None,
            lookback_days: default_lookback(),
            momentum: None,
            winsorize: true,
            sector_neutral_scores: false,
            chains: default_chains(),
            draws: None,
            walk: default_walk(),
            target: default_target(),
            constraints: ConstraintSpec::default(),
            seed: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Invalid(format!("backtest config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        if self.lookback_days < 2 {
            return Err(Error::Config("covariance lookback needs at least two days".into()));
        }
        if let TargetChoice::BenchmarkDirichlet { scale } = self.target {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!("Dirichlet scale must be positive, got {scale}")));
            }
        }
        if let Some(m) = self.momentum {
            if m.skip >= m.window {
                return Err(Error::Config("momentum skip must be shorter than its window".into()));
            }
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s >= e {
                return Err(Error::Config("backtest start must precede its end".into()));
            }
        }
        self.walk.validate()
    }
}
