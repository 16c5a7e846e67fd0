//! Synthetic factor-model markets with planted premia.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::MarketData;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFactor {
    pub name: String,
    /// Daily drift per unit of score (0.001 = 10 bp a day per standard deviation).
    #[serde(default)]
    pub premium: f64,
}

/// Returns follow `r_i = m + sum_s beta_is (premium_s + f_s) + e_i`, where the
/// loadings `beta` are the published scores of the most recent month end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_assets: usize,
    /// Length of the evaluation span after the warm-up history.
    pub years: f64,
    /// History before the evaluation span, for covariance estimation.
    pub warmup_days: usize,
    pub factors: Vec<SynthFactor>,
    pub n_sectors: usize,
    pub seed: u64,
    pub market_drift: f64,
    pub market_vol: f64,
    pub factor_vol: f64,
    pub idio_vol: f64,
    /// Month-to-month autocorrelation of the scores.
    pub score_persistence: f64,
    pub start: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_assets: 50,
            years: 5.0,
            warmup_days: 1260,
            factors: ["value", "momentum", "quality", "size"]
                .iter()
                .map(|n| SynthFactor { name: n.to_string(), premium: 0.0 })
                .collect(),
            n_sectors: 5,
            seed: 0,
            market_drift: 3e-4,
            market_vol: 0.01,
            factor_vol: 0.003,
            idio_vol: 0.015,
            score_persistence: 0.9,
            start: NaiveDate::from_ymd_opt(1995, 1, 2).expect("valid date"),
        }
    }
}

impl SynthConfig {
    pub fn with_premium(mut self, factor: &str, premium: f64) -> Self {
        match self.factors.iter_mut().find(|f| f.name == factor) {
            Some(f) => f.premium = premium,
            None => self.factors.push(SynthFactor { name: factor.to_string(), premium }),
        }
        self
    }
}

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Weekdays starting at `start`.
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(count)
        .collect()
}

/// Indices of the last date of each calendar month.
pub fn month_ends(dates: &[NaiveDate]) -> Vec<usize> {
    (0..dates.len())
        .filter(|&t| t + 1 == dates.len() || dates[t + 1].month() != dates[t].month())
        .collect()
}

pub fn synth_market(cfg: &SynthConfig) -> Result<MarketData> {
    let n = cfg.n_assets;
    if n < 10 {
        return Err(Error::Invalid(format!("a synthetic market needs at least 10 assets, got {n}")));
    }
    if cfg.factors.is_empty() || cfg.n_sectors == 0 || !(cfg.years > 0.0) || !(0.0..1.0).contains(&cfg.score_persistence) {
        return Err(Error::Invalid("synthetic market needs factors, sectors, a positive span and persistence in [0, 1)".into()));
    }
    let f = cfg.factors.len();
    let days = cfg.warmup_days + (cfg.years * TRADING_DAYS_PER_YEAR).round() as usize;
    let dates = business_days(cfg.start, days);
    let ends = month_ends(&dates);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let mut beta = DMatrix::from_fn(n, f, |_, _| normal());
    let mut caps = DVector::from_fn(n, |_, _| normal().exp());
    let innov = (1.0 - cfg.score_persistence.powi(2)).sqrt();

    let mut returns = DMatrix::zeros(days, n);
    let mut scores = BTreeMap::new();
    let mut benchmark = BTreeMap::new();
    let mut next_end = 0;
    for t in 0..days {
        let market = cfg.market_drift + cfg.market_vol * normal();
        let factor_ret: Vec<f64> = cfg.factors.iter().map(|s| s.premium + cfg.factor_vol * normal()).collect();
        for i in 0..n {
            let mut r = market + cfg.idio_vol * normal();
            for s in 0..f {
                r += beta[(i, s)] * factor_ret[s];
            }
            let r = r.max(-0.95);
            returns[(t, i)] = r;
            caps[i] *= 1.0 + r;
        }
        if next_end < ends.len() && ends[next_end] == t {
            // Loadings for the coming month are published at the month-end close.
            beta = beta.map(|b| cfg.score_persistence * b + innov * normal());
            scores.insert(dates[t], beta.clone());
            benchmark.insert(dates[t], &caps / caps.sum());
            next_end += 1;
        }
    }
    let data = MarketData {
        dates,
        asset_ids: (0..n).map(|i| format!("S{i:03}")).collect(),
        returns,
        factor_names: cfg.factors.iter().map(|s| s.name.clone()).collect(),
        scores,
        benchmark,
        sectors: (0..n).map(|i| format!("sector{}", i % cfg.n_sectors)).collect(),
    };
    data.validate()?;
    Ok(data)
}
