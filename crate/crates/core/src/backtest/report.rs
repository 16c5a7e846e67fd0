//! Path statistics on annualized discrete monthly returns.

use std::io::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::concat::{compound, Paths};
use super::data::csv_err;
use crate::error::{Error, Result};

/// Compound daily returns into calendar-month returns.
pub fn monthly_returns(dates: &[NaiveDate], daily: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut acc = 1.0;
    for (t, r) in daily.iter().enumerate() {
        acc *= 1.0 + r;
        let month_end = dates.get(t + 1).is_none_or(|n| (n.year(), n.month()) != (dates[t].year(), dates[t].month()));
        if month_end {
            out.push(acc - 1.0);
            acc = 1.0;
        }
    }
    out
}

/// `(prod(1 + r))^(12 / M) - 1`.
pub fn annualized_return(monthly: &[f64]) -> f64 {
    if monthly.is_empty() {
        return 0.0;
    }
    (1.0 + compound(monthly)).powf(12.0 / monthly.len() as f64) - 1.0
}

/// Sample standard deviation of monthly returns times `sqrt(12)`.
pub fn annualized_volatility(monthly: &[f64]) -> f64 {
    let m = monthly.len();
    if m < 2 {
        return 0.0;
    }
    let mean = monthly.iter().sum::<f64>() / m as f64;
    let var = monthly.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    (var * 12.0).sqrt()
}

/// Pearson correlation; `None` when either side has no spread.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let (mx, my) = (x.iter().sum::<f64>() / n as f64, y.iter().sum::<f64>() / n as f64);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx).powi(2);
        syy += (y[i] - my).powi(2);
    }
    let denom = (sxx * syy).sqrt();
    (denom > 0.0).then(|| sxy / denom)
}

/// Least-squares coefficients `[c0, c1, c2]` of `y ~ c0 + c1 x + c2 x^2`.
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> Option<[f64; 3]> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let design = DMatrix::from_fn(n, 3, |i, j| x[i].powi(j as i32));
    let rhs = DVector::from_column_slice(y);
    let c = design.svd(true, true).solve(&rhs, 1e-12).ok()?;
    c.iter().all(|v| v.is_finite()).then(|| [c[0], c[1], c[2]])
}

/// Map values linearly onto `[-1, 1]`; all zeros when they coincide.
pub fn rescale_unit(x: &[f64]) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PathSummary {
    /// 1 is the highest-scoring path.
    pub rank: usize,
    pub exposure: f64,
    pub scaled_exposure: f64,
    pub annual_return: f64,
    pub annual_volatility: f64,
    pub cumulative_return: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub information_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub n_paths: usize,
    pub n_months: usize,
    pub corr_exposure_return: Option<f64>,
    pub corr_exposure_volatility: Option<f64>,
    /// `[c0, c1, c2]` over scaled exposure.
    pub fit_return: Option<[f64; 3]>,
    pub fit_volatility: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark_return: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark_volatility: Option<f64>,
    pub paths: Vec<PathSummary>,
}

pub fn report(paths: &Paths, benchmark: Option<&[f64]>) -> Result<Summary> {
    if paths.k() == 0 || paths.dates.is_empty() {
        return Err(Error::InsufficientData("no paths to report on".into()));
    }
    if benchmark.is_some_and(|b| b.len() != paths.dates.len()) {
        return Err(Error::Dimension("benchmark path length differs from the paths".into()));
    }
    let bench_monthly = benchmark.map(|b| monthly_returns(&paths.dates, b));
    let exposure = paths.exposures();
    let scaled = rescale_unit(&exposure);
    let mut rows = Vec::with_capacity(paths.k());
    for r in 0..paths.k() {
        let daily = paths.path(r);
        let monthly = monthly_returns(&paths.dates, &daily);
        let information_ratio = bench_monthly.as_ref().and_then(|b| {
            let active: Vec<f64> = monthly.iter().zip(b).map(|(p, q)| p - q).collect();
            let sd = annualized_volatility(&active);
            (sd > 0.0).then(|| 12.0 * active.iter().sum::<f64>() / active.len() as f64 / sd)
        });
        rows.push(PathSummary {
            rank: r + 1,
            exposure: exposure[r],
            scaled_exposure: scaled[r],
            annual_return: annualized_return(&monthly),
            annual_volatility: annualized_volatility(&monthly),
            cumulative_return: compound(&daily),
            information_ratio,
        });
    }
    let ret: Vec<f64> = rows.iter().map(|p| p.annual_return).collect();
    let vol: Vec<f64> = rows.iter().map(|p| p.annual_volatility).collect();
    Ok(Summary {
        schema_version: crate::SCHEMA_VERSION,
        n_paths: paths.k(),
        n_months: monthly_returns(&paths.dates, &paths.path(0)).len(),
        corr_exposure_return: pearson(&scaled, &ret),
        corr_exposure_volatility: pearson(&scaled, &vol),
        fit_return: quadratic_fit(&scaled, &ret),
        fit_volatility: quadratic_fit(&scaled, &vol),
        benchmark_return: bench_monthly.as_ref().map(|b| annualized_return(b)),
        benchmark_volatility: bench_monthly.as_ref().map(|b| annualized_volatility(b)),
        paths: rows,
    })
}

/// Daily path returns as CSV: `date,benchmark,path_1,...,path_k`, after a
/// `# schema_version=N` comment line.
pub fn write_paths_csv(paths: &Paths, benchmark: Option<&[f64]>, out: &Path) -> Result<()> {
    let mut file = std::fs::File::create(out)?;
    writeln!(file, "# schema_version={}", crate::SCHEMA_VERSION)?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["date".to_string()];
    if benchmark.is_some() {
        header.push("benchmark".into());
    }
    header.extend((1..=paths.k()).map(|r| format!("path_{r}")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, d) in paths.dates.iter().enumerate() {
        let mut rec = vec![d.to_string()];
        if let Some(b) = benchmark {
            rec.push(format!("{:e}", b[t]));
        }
        rec.extend((0..paths.k()).map(|r| format!("{:e}", paths.returns[(t, r)])));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
