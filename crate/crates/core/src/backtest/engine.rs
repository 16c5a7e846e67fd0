//! The rebalancing loop.

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::concat::{buy_and_hold, concatenate_by_score, Paths, PeriodResult};
use super::config::{BacktestConfig, Schedule, TargetChoice};
use super::data::{MarketData, PointInTime};
use super::synth::month_ends;
use crate::densities::TargetDensity;
use crate::diagnostics::{gate, GateReport};
use crate::error::{Error, Result};
use crate::portfolio::{build_body, zscore, MarketSnapshot, WINSOR_LIMIT};
use crate::walks::sample;

pub const MOMENTUM: &str = "momentum";

/// Floor on the default draws per chain at each rebalance.
pub const MIN_DRAWS_PER_CHAIN: usize = 250;

/// Investable cross-section at one rebalance, with positions in the full universe.
#[derive(Debug, Clone)]
pub struct Universe {
    pub snapshot: MarketSnapshot,
    pub assets: Vec<usize>,
}

impl Universe {
    /// Embed weights over the investable assets into the full universe.
    pub fn widen(&self, w: &DVector<f64>, n: usize) -> DVector<f64> {
        let mut full = DVector::zeros(n);
        for (k, &i) in self.assets.iter().enumerate() {
            full[i] = w[k];
        }
        full
    }

    /// Score of full-universe weights on factor `f`; assets outside the universe score zero.
    pub fn score(&self, full: &DVector<f64>, f: usize) -> f64 {
        self.assets.iter().enumerate().map(|(k, &i)| full[i] * self.snapshot.scores[(k, f)]).sum()
    }
}

fn factor_names(data: &MarketData, cfg: &BacktestConfig) -> Vec<String> {
    let mut names = data.factor_names.clone();
    if cfg.momentum.is_some() && !names.iter().any(|n| n == MOMENTUM) {
        names.push(MOMENTUM.to_string());
    }
    names
}

/// Snapshot from information available at the close of the rebalance date.
pub fn snapshot_at(pit: &PointInTime<'_>, cfg: &BacktestConfig) -> Result<Universe> {
    let data = pit.data();
    let window = pit
        .trailing_returns(cfg.lookback_days)
        .ok_or_else(|| Error::InsufficientData(format!("fewer than {} days of history at {}", cfg.lookback_days, pit.date())))?;
    let mom = match cfg.momentum {
        Some(m) => Some((
            m,
            pit.trailing_returns(m.window)
                .ok_or_else(|| Error::InsufficientData(format!("fewer than {} days for momentum at {}", m.window, pit.date())))?,
        )),
        None => None,
    };
    let raw = pit.scores().ok_or_else(|| Error::InsufficientData(format!("no scores published by {}", pit.date())))?;
    let bench = pit.benchmark().ok_or_else(|| Error::InsufficientData(format!("no benchmark published by {}", pit.date())))?;

    let complete = |m: &DMatrix<f64>, j: usize| m.column(j).iter().all(|r| !r.is_nan());
    let assets: Vec<usize> = (0..data.n_assets())
        .filter(|&j| {
            complete(&window, j)
                && bench[j] > 0.0
                && raw.row(j).iter().all(|s| s.is_finite())
                && mom.as_ref().is_none_or(|(_, w)| complete(w, j))
        })
        .collect();
    let n = assets.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} investable assets at {}", pit.date())));
    }

    let names = factor_names(data, cfg);
    let mut raw_cols: Vec<DVector<f64>> = (0..data.factor_names.len())
        .map(|f| DVector::from_iterator(n, assets.iter().map(|&j| raw[(j, f)])))
        .collect();
    if let Some((m, w)) = &mom {
        if data.factor_names.iter().any(|x| x == MOMENTUM) {
            log::debug!("data already carries momentum scores; the derived window is not used");
        } else {
            let span = m.window - m.skip;
            raw_cols.push(DVector::from_iterator(
                n,
                assets.iter().map(|&j| w.column(j).rows(0, span).iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0),
            ));
        }
    }
    let sectors: Vec<String> = assets.iter().map(|&j| data.sectors[j].clone()).collect();
    let group = cfg.sector_neutral_scores.then_some(sectors.as_slice());
    let limit = cfg.winsorize.then_some(WINSOR_LIMIT);
    let mut scores = DMatrix::zeros(n, names.len());
    for (f, col) in raw_cols.iter().enumerate() {
        scores.set_column(f, &zscore(col, group, limit)?);
    }

    let sub = DMatrix::from_fn(window.nrows(), n, |t, k| window[(t, assets[k])]);
    let mean = sub.row_mean().transpose();
    let mut centered = sub.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centered.tr_mul(&centered) / (sub.nrows() as f64 - 1.0);
    let ridge = 1e-6 * cov.trace() / n as f64;
    for i in 0..n {
        cov[(i, i)] += ridge;
    }
    let b = DVector::from_iterator(n, assets.iter().map(|&j| bench[j]));
    let snapshot = MarketSnapshot {
        asset_ids: assets.iter().map(|&j| data.asset_ids[j].clone()).collect(),
        benchmark: &b / b.sum(),
        mean_returns: mean,
        covariance: cov,
        factor_names: names,
        scores,
        sectors,
    };
    snapshot.validate()?;
    Ok(Universe { snapshot, assets })
}

/// Rebalance row indices and the last row of each holding period.
pub fn schedule(data: &MarketData, cfg: &BacktestConfig) -> Vec<(usize, usize)> {
    let need = cfg.lookback_days.max(cfg.momentum.map_or(0, |m| m.window));
    let last = match cfg.end {
        Some(e) => match data.dates.iter().rposition(|d| *d <= e) {
            Some(i) => i,
            None => return Vec::new(),
        },
        None => data.dates.len().saturating_sub(1),
    };
    let rebal: Vec<usize> = month_ends(&data.dates)
        .into_iter()
        .filter(|&t| match cfg.rebalance {
            Schedule::Monthly => true,
            Schedule::Quarterly => data.dates[t].month() % 3 == 0,
        })
        .filter(|&t| t + 1 >= need && t < last && cfg.start.is_none_or(|s| data.dates[t] >= s))
        .collect();
    rebal.iter().enumerate().map(|(i, &t)| (t, rebal.get(i + 1).copied().unwrap_or(last).min(last))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RebalanceStatus {
    Sampled,
    /// The first run failed the gate; a second run with doubled burn-in passed.
    Resampled,
    /// Both runs failed the gate; the second run's portfolios are used.
    GateFailed,
    /// No new portfolios; previous holdings keep floating.
    CarriedForward { reason: String },
    /// No portfolios at all yet; the period is left out of the paths.
    Skipped { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct RebalanceRecord {
    pub date: NaiveDate,
    pub holding_days: usize,
    pub n_assets: usize,
    pub dim: usize,
    pub draws: usize,
    #[serde(flatten)]
    pub status: RebalanceStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateReport>,
    /// Latest date of any input read for this rebalance.
    pub latest_access: Option<NaiveDate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BacktestResult {
    pub paths: Paths,
    /// Daily returns of the buy-and-hold benchmark, aligned with `paths.dates`.
    pub benchmark: Vec<f64>,
    pub records: Vec<RebalanceRecord>,
    pub sort_factor: String,
}

struct Decision {
    weights: Vec<DVector<f64>>,
    scores: Vec<f64>,
    dim: usize,
    draws: usize,
    status: RebalanceStatus,
    gate: Option<GateReport>,
}

/// Errors that stop the whole run rather than one rebalance.
fn is_fatal(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::Dimension(_) | Error::Io(_))
}

/// Shared loop: decide holdings at each rebalance, float them to the next one,
/// carry forward on failure.
fn drive(
    data: &MarketData,
    cfg: &BacktestConfig,
    mut decide: impl FnMut(usize, &Universe) -> Result<Decision>,
) -> Result<BacktestResult> {
    cfg.validate()?;
    data.validate()?;
    let names = factor_names(data, cfg);
    let sort = names
        .iter()
        .position(|n| *n == cfg.sort_factor)
        .ok_or_else(|| Error::Config(format!("sort factor {:?} is not among {names:?}", cfg.sort_factor)))?;
    let plan = schedule(data, cfg);
    if plan.is_empty() {
        return Err(Error::InsufficientData("no rebalance date has enough history inside the requested span".into()));
    }
    let n = data.n_assets();
    let mut periods = Vec::new();
    let mut bench_daily = Vec::new();
    let mut records = Vec::new();
    let mut held: Option<(Vec<DVector<f64>>, Vec<f64>)> = None;
    let mut bench_held: Option<DVector<f64>> = None;
    let mut first_skip: Option<Error> = None;

    for (j, &(t, end)) in plan.iter().enumerate() {
        let pit = PointInTime::new(data, t);
        let universe = snapshot_at(&pit, cfg);
        let bench_now = pit.benchmark().map(|b| &b / b.sum());
        let outcome = universe.as_ref().map_err(clone_err).and_then(|u| decide(j, u));
        let (weights, scores, rec_status, dim, draws, gate) = match outcome {
            Ok(d) => (d.weights, d.scores, d.status, d.dim, d.draws, d.gate),
            Err(e) if is_fatal(&e) => return Err(e),
            Err(e) => match held.take() {
                Some((w, old_scores)) => {
                    let scores = match &universe {
                        Ok(u) => w.iter().map(|x| u.score(x, sort)).collect(),
                        Err(_) => old_scores,
                    };
                    log::warn!("rebalance {} carried forward: {e}", data.dates[t]);
                    (w, scores, RebalanceStatus::CarriedForward { reason: e.to_string() }, 0, 0, None)
                }
                None => {
                    log::warn!("rebalance {} skipped: {e}", data.dates[t]);
                    records.push(RebalanceRecord {
                        date: data.dates[t],
                        holding_days: end - t,
                        n_assets: universe.as_ref().map_or(0, |u| u.assets.len()),
                        dim: 0,
                        draws: 0,
                        status: RebalanceStatus::Skipped { reason: e.to_string() },
                        gate: None,
                        latest_access: pit.latest_access(),
                    });
                    first_skip.get_or_insert(e);
                    continue;
                }
            },
        };

        let hold = data.returns.rows(t + 1, end - t);
        let mut daily = DMatrix::zeros(end - t, weights.len());
        let mut drifted = Vec::with_capacity(weights.len());
        for (c, w) in weights.iter().enumerate() {
            let (path, w_end) = buy_and_hold(w, hold);
            daily.set_column(c, &DVector::from_vec(path));
            drifted.push(w_end);
        }
        let bw = match (bench_now, bench_held.take()) {
            (Some(b), _) => b,
            (None, Some(b)) => b,
            (None, None) => DVector::from_element(n, 1.0 / n as f64),
        };
        let (bpath, b_end) = buy_and_hold(&bw, hold);
        bench_daily.extend(bpath);
        bench_held = Some(b_end);

        records.push(RebalanceRecord {
            date: data.dates[t],
            holding_days: end - t,
            n_assets: universe.as_ref().map_or(0, |u| u.assets.len()),
            dim,
            draws,
            status: rec_status,
            gate,
            latest_access: pit.latest_access(),
        });
        periods.push(PeriodResult {
            rebalance: data.dates[t],
            holding_dates: data.dates[t + 1..=end].to_vec(),
            daily,
            scores: scores.clone(),
        });
        held = Some((drifted, scores));
    }
    if periods.is_empty() {
        // Surface why nothing could be held, e.g. an infeasible constraint set.
        if let Some(e) = first_skip {
            return Err(e);
        }
    }
    let paths = concatenate_by_score(&periods)?;
    Ok(BacktestResult { paths, benchmark: bench_daily, records, sort_factor: cfg.sort_factor.clone() })
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), io.to_string())),
        other => Error::InsufficientData(other.to_string()),
    }
}

fn period_seed(seed: u64, period: usize) -> u64 {
    seed ^ (period as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Run the random-portfolio backtest: sample `k` portfolios per rebalance and
/// chain them across periods by their rank on the sort factor.
pub fn run_backtest(data: &MarketData, cfg: &BacktestConfig) -> Result<BacktestResult> {
    let n = data.n_assets();
    let sort = factor_names(data, cfg).iter().position(|x| *x == cfg.sort_factor);
    drive(data, cfg, |period, u| {
        let sort = sort.expect("checked by the driver");
        let snap = &u.snapshot;
        let (body, emb) = build_body(&cfg.constraints, snap)?;
        let target = match cfg.target {
            TargetChoice::Uniform => TargetDensity::Uniform,
            TargetChoice::BenchmarkDirichlet { scale } => {
                TargetDensity::transformed(TargetDensity::dirichlet(&snap.benchmark * scale)?, &emb)?
            }
        };
        let d = body.dim();
        // Short chains make the split PSRF noisy enough to trip the gate by chance.
        let default = (4 * cfg.k).max(20 * d).max(MIN_DRAWS_PER_CHAIN * cfg.chains);
        let draws = cfg.draws.unwrap_or(default).max(cfg.k).max(4 * cfg.chains);
        let mut walk = cfg.walk.clone().with_seed(period_seed(cfg.seed, period));
        let mut set = sample(&body, &target, &walk, draws, cfg.chains)?;
        let mut report = gate(&set.chain_matrices(), d)?;
        let mut status = RebalanceStatus::Sampled;
        if !report.pass {
            walk.burn_in = Some(2 * walk.burn_in.unwrap_or(20 * d));
            set = sample(&body, &target, &walk, draws, cfg.chains)?;
            report = gate(&set.chain_matrices(), d)?;
            status = if report.pass { RebalanceStatus::Resampled } else { RebalanceStatus::GateFailed };
            if !report.pass {
                log::warn!("diagnostics gate failed twice: {}", report.reasons.join("; "));
            }
        }
        let picks: Vec<usize> = (0..cfg.k).map(|i| ((i as f64 + 0.5) * draws as f64 / cfg.k as f64) as usize).collect();
        let weights: Vec<DVector<f64>> = picks
            .iter()
            .map(|&r| u.widen(&emb.lift(&set.draws.row(r).transpose()), n))
            .collect();
        let scores = weights.iter().map(|w| u.score(w, sort)).collect();
        Ok(Decision { weights, scores, dim: d, draws, status, gate: Some(report) })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Equal,
    Cap,
}

/// Five sorted-bucket portfolios per rebalance, chained top bucket to bottom.
/// Ties in the score go to the lexicographically smaller asset id.
pub fn quintile_baseline(data: &MarketData, cfg: &BacktestConfig, weighting: Weighting) -> Result<BacktestResult> {
    let n = data.n_assets();
    let sort = factor_names(data, cfg).iter().position(|x| *x == cfg.sort_factor);
    let cfg5 = BacktestConfig { k: 5, ..cfg.clone() };
    drive(data, &cfg5, |_, u| {
        let sort = sort.expect("checked by the driver");
        let snap = &u.snapshot;
        let m = u.assets.len();
        if m < 5 {
            return Err(Error::InsufficientData(format!("{m} assets cannot fill five buckets")));
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            snap.scores[(b, sort)]
                .partial_cmp(&snap.scores[(a, sort)])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| snap.asset_ids[a].cmp(&snap.asset_ids[b]))
        });
        let mut weights = Vec::with_capacity(5);
        for q in 0..5 {
            let members = &order[q * m / 5..(q + 1) * m / 5];
            let mut w = DVector::zeros(m);
            for &i in members {
                w[i] = match weighting {
                    Weighting::Equal => 1.0,
                    Weighting::Cap => snap.benchmark[i],
                };
            }
            let total = w.sum();
            weights.push(u.widen(&(w / total), n));
        }
        let scores = weights.iter().map(|w| u.score(w, sort)).collect();
        Ok(Decision { weights, scores, dim: 0, draws: 0, status: RebalanceStatus::Sampled, gate: None })
    })
}
