//! Rebalanced random-portfolio backtests and synthetic markets to run them on.

mod concat;
mod config;
mod data;
mod engine;
mod report;
mod synth;

pub use concat::{buy_and_hold, compound, concatenate_by_score, Paths, PeriodResult};
pub use config::{BacktestConfig, MomentumWindow, Schedule, TargetChoice};
pub use data::{MarketData, PointInTime};
pub use engine::{
    quintile_baseline, run_backtest, schedule, snapshot_at, BacktestResult, RebalanceRecord, RebalanceStatus, Universe,
    Weighting, MIN_DRAWS_PER_CHAIN, MOMENTUM,
};
pub use report::{
    annualized_return, annualized_volatility, monthly_returns, pearson, quadratic_fit, report, rescale_unit,
    write_paths_csv, PathSummary, Summary,
};
pub use synth::{business_days, month_ends, synth_market, SynthConfig, SynthFactor, TRADING_DAYS_PER_YEAR};
