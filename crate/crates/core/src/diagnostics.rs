//! Convergence diagnostics: potential scale reduction and effective sample size.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

pub const PSRF_THRESHOLD: f64 = 1.1;
pub const ESS_FRACTION: f64 = 0.95;

fn check_chains(chains: &[DMatrix<f64>], min_len: usize) -> Result<usize> {
    if chains.len() < 2 {
        return Err(Error::InsufficientData(format!("{} chain(s); at least 2 are needed", chains.len())));
    }
    let d = chains[0].ncols();
    for (i, c) in chains.iter().enumerate() {
        if c.ncols() != d {
            return Err(Error::Dimension(format!("chain {i} has {} columns, expected {d}", c.ncols())));
        }
        if c.nrows() < min_len {
            return Err(Error::InsufficientData(format!("chain {i} has {} draws, need {min_len}", c.nrows())));
        }
    }
    Ok(d)
}

/// Gelman-Rubin statistic per dimension on the chains as given.
///
/// Dimensions with zero within-chain variance report `inf`.
pub fn psrf_classic(chains: &[DMatrix<f64>]) -> Result<DVector<f64>> {
    let d = check_chains(chains, 2)?;
    let m = chains.len() as f64;
    // Unequal lengths are truncated to the shortest chain.
    let k = chains.iter().map(|c| c.nrows()).min().unwrap_or(0);
    let kf = k as f64;
    let mut out = DVector::zeros(d);
    for j in 0..d {
        let mut means = Vec::with_capacity(chains.len());
        let mut w = 0.0;
        for c in chains {
            let col = c.view((0, j), (k, 1));
            let mean = col.mean();
            w += col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (kf - 1.0);
            means.push(mean);
        }
        w /= m;
        let grand = means.iter().sum::<f64>() / m;
        let b = kf * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1.0);
        out[j] = if w > 0.0 {
            ((w * (kf - 1.0) / kf + b / kf) / w).sqrt()
        } else {
            f64::INFINITY
        };
    }
    Ok(out)
}

/// Split-chain PSRF: every chain is halved before computing the statistic, so
/// drift inside a single chain also inflates the result.
pub fn psrf(chains: &[DMatrix<f64>]) -> Result<DVector<f64>> {
    check_chains(chains, 4)?;
    let mut halves = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.nrows() / 2;
        halves.push(c.rows(0, h).into_owned());
        halves.push(c.rows(c.nrows() - h, h).into_owned());
    }
    psrf_classic(&halves)
}

/// Effective sample size per dimension with Geyer's initial positive sequence.
pub fn ess(chain: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = chain.nrows();
    if k < 4 {
        return Err(Error::InsufficientData(format!("{k} draws; ESS needs at least 4")));
    }
    Ok(DVector::from_iterator(
        chain.ncols(),
        chain.column_iter().map(|c| ess_1d(c.as_slice())),
    ))
}

fn ess_1d(x: &[f64]) -> f64 {
    let k = x.len();
    let mean = x.iter().sum::<f64>() / k as f64;
    let rho = autocorrelation(x, mean);
    if !(rho[0] > 0.0) {
        return 0.0;
    }
    // tau = -1 + 2 * sum of positive pair sums (rho_{2m} + rho_{2m+1}).
    let mut tau = -1.0;
    let mut t = 0;
    while t + 1 < k {
        let pair = (rho[t] + rho[t + 1]) / rho[0];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        t += 2;
    }
    (k as f64 / tau.max(1e-12)).min(k as f64)
}

/// Biased autocovariances `c_t = sum (x_i - m)(x_{i+t} - m) / k` via zero-padded FFT.
fn autocorrelation(x: &[f64], mean: f64) -> Vec<f64> {
    let k = x.len();
    let len = (2 * k).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / (len as f64 * k as f64);
    let mut out: Vec<f64> = buf[..k].iter().map(|c| c.re * scale).collect();
    // Constant chains leave only FFT round-off.
    if x.iter().all(|v| *v == mean) {
        out[0] = 0.0;
    }
    out
}

/// Per-dimension ESS summed over chains.
pub fn total_ess(chains: &[DMatrix<f64>]) -> Result<DVector<f64>> {
    let mut total: Option<DVector<f64>> = None;
    for c in chains {
        let e = ess(c)?;
        total = Some(match total {
            None => e,
            Some(t) if t.len() == e.len() => t + e,
            Some(_) => return Err(Error::Dimension("chains disagree in dimension".into())),
        });
    }
    total.ok_or_else(|| Error::InsufficientData("no chains".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct GateReport {
    pub pass: bool,
    pub max_psrf: f64,
    pub min_ess: f64,
    pub ess_required: f64,
    pub psrf: Vec<f64>,
    pub ess: Vec<f64>,
    pub reasons: Vec<String>,
}

/// Pass iff the worst PSRF is below 1.1 and the smallest total ESS exceeds
/// `0.95 * n_effective_dim`.
pub fn gate(chains: &[DMatrix<f64>], n_effective_dim: usize) -> Result<GateReport> {
    let r = psrf(chains)?;
    let e = total_ess(chains)?;
    let max_psrf = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_ess = e.iter().copied().fold(f64::INFINITY, f64::min);
    let ess_required = ESS_FRACTION * n_effective_dim as f64;
    let mut reasons = Vec::new();
    if !(max_psrf < PSRF_THRESHOLD) {
        let j = r.iter().position(|v| *v == max_psrf || v.is_nan()).unwrap_or(0);
        reasons.push(format!("PSRF {max_psrf:.4} >= {PSRF_THRESHOLD} in dimension {j}"));
    }
    if !(min_ess > ess_required) {
        let j = e.iter().position(|v| *v == min_ess).unwrap_or(0);
        reasons.push(format!("ESS {min_ess:.1} <= {ess_required:.2} in dimension {j}"));
    }
    Ok(GateReport {
        pass: reasons.is_empty(),
        max_psrf,
        min_ess,
        ess_required,
        psrf: r.iter().copied().collect(),
        ess: e.iter().copied().collect(),
        reasons,
    })
}
