//! Buy-and-hold simulation and score-ranked concatenation of holding periods.

use std::cmp::Ordering;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DMatrixView, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Hold `weights` through the rows of `returns` (days by assets), letting them
/// float. Missing returns count as zero. Returns the daily portfolio returns
/// and the drifted weights at the end, normalized to the starting total.
pub fn buy_and_hold(weights: &DVector<f64>, returns: DMatrixView<'_, f64>) -> (Vec<f64>, DVector<f64>) {
    let total = weights.sum();
    let mut value = weights.clone();
    let mut daily = Vec::with_capacity(returns.nrows());
    for t in 0..returns.nrows() {
        let before = value.sum();
        for i in 0..value.len() {
            let r = returns[(t, i)];
            if !r.is_nan() && value[i] != 0.0 {
                value[i] *= 1.0 + r;
            }
        }
        daily.push(value.sum() / before - 1.0);
    }
    let end = if value.sum() != 0.0 { &value * (total / value.sum()) } else { value };
    (daily, end)
}

pub fn compound(returns: &[f64]) -> f64 {
    returns.iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0
}

/// The `k` portfolios of one holding period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodResult {
    pub rebalance: NaiveDate,
    pub holding_dates: Vec<NaiveDate>,
    /// Holding days by portfolios.
    pub daily: DMatrix<f64>,
    pub scores: Vec<f64>,
}

impl PeriodResult {
    pub fn k(&self) -> usize {
        self.scores.len()
    }

    pub fn period_return(&self, j: usize) -> f64 {
        self.daily.column(j).iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0
    }

    /// Portfolio indices from highest to lowest score; ties go to the higher
    /// period return, then to the lower index.
    pub fn ranking(&self) -> Vec<usize> {
        let ret: Vec<f64> = (0..self.k()).map(|j| self.period_return(j)).collect();
        let mut idx: Vec<usize> = (0..self.k()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b]
                .partial_cmp(&self.scores[a])
                .unwrap_or(Ordering::Equal)
                .then(ret[b].partial_cmp(&ret[a]).unwrap_or(Ordering::Equal))
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Rank-aligned daily paths: column `r` chains the rank-`r` portfolio of every period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Paths {
    pub dates: Vec<NaiveDate>,
    pub rebalances: Vec<NaiveDate>,
    /// Dates by ranks.
    #[serde(skip)]
    pub returns: DMatrix<f64>,
    /// Periods by ranks: the score of the portfolio holding that rank.
    #[serde(skip)]
    pub scores: DMatrix<f64>,
    /// Periods by ranks: the original portfolio index.
    pub order: Vec<Vec<usize>>,
}

impl Paths {
    pub fn k(&self) -> usize {
        self.returns.ncols()
    }

    pub fn path(&self, r: usize) -> Vec<f64> {
        self.returns.column(r).iter().copied().collect()
    }

    /// Mean score of each path over its periods.
    pub fn exposures(&self) -> Vec<f64> {
        (0..self.k()).map(|r| self.scores.column(r).mean()).collect()
    }
}

pub fn concatenate_by_score(periods: &[PeriodResult]) -> Result<Paths> {
    let Some(first) = periods.first() else {
        return Err(Error::InsufficientData("no holding periods to concatenate".into()));
    };
    let k = first.k();
    if let Some(p) = periods.iter().find(|p| p.k() != k || p.daily.ncols() != k) {
        return Err(Error::Dimension(format!("period {} has {} portfolios, expected {k}", p.rebalance, p.k())));
    }
    let total_days: usize = periods.iter().map(|p| p.holding_dates.len()).sum();
    let mut returns = DMatrix::zeros(total_days, k);
    let mut scores = DMatrix::zeros(periods.len(), k);
    let mut dates = Vec::with_capacity(total_days);
    let mut order = Vec::with_capacity(periods.len());
    let mut row = 0;
    for (t, p) in periods.iter().enumerate() {
        let rank = p.ranking();
        for (r, &j) in rank.iter().enumerate() {
            returns.view_mut((row, r), (p.holding_dates.len(), 1)).copy_from(&p.daily.column(j));
            scores[(t, r)] = p.scores[j];
        }
        row += p.holding_dates.len();
        dates.extend_from_slice(&p.holding_dates);
        order.push(rank);
    }
    Ok(Paths { dates, rebalances: periods.iter().map(|p| p.rebalance).collect(), returns, scores, order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, d).unwrap()
    }

    fn period(start: u32, scores: Vec<f64>, daily: &[f64]) -> PeriodResult {
        let k = scores.len();
        let days = daily.len() / k;
        PeriodResult {
            rebalance: day(start),
            holding_dates: (0..days as u32).map(|i| day(start + 1 + i)).collect(),
            daily: DMatrix::from_row_slice(days, k, daily),
            scores,
        }
    }

    #[test]
    fn buy_and_hold_floats_weights() {
        let w = DVector::from_vec(vec![0.5, 0.5]);
        let r = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.1]);
        let (daily, end) = buy_and_hold(&w, r.as_view());
        assert!((daily[0] - 0.05).abs() < 1e-15);
        // Second day: asset two holds 0.5 / 1.05 of the value.
        assert!((daily[1] - 0.05 / 1.05).abs() < 1e-15);
        assert!((compound(&daily) - (0.55 + 0.55 - 1.0)).abs() < 1e-15);
        assert!((end.sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sorted_scores_keep_order() {
        let p = period(1, vec![3.0, 2.0, 1.0], &[0.01, 0.02, 0.03]);
        let paths = concatenate_by_score(&[p.clone(), p]).unwrap();
        assert_eq!(paths.order, vec![vec![0, 1, 2], vec![0, 1, 2]]);
        assert_eq!(paths.path(1), vec![0.02, 0.02]);
    }

    #[test]
    fn reversed_scores_reorder() {
        let a = period(1, vec![3.0, 2.0, 1.0], &[0.01, 0.02, 0.03]);
        let b = period(10, vec![1.0, 2.0, 3.0], &[0.04, 0.05, 0.06]);
        let paths = concatenate_by_score(&[a, b]).unwrap();
        assert_eq!(paths.order[1], vec![2, 1, 0]);
        assert_eq!(paths.path(0), vec![0.01, 0.06]);
        assert_eq!(paths.exposures(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn ties_break_on_return() {
        let p = period(1, vec![1.0, 1.0], &[0.01, 0.02]);
        assert_eq!(p.ranking(), vec![1, 0]);
    }

    #[test]
    fn unequal_k_is_an_error() {
        let a = period(1, vec![1.0, 2.0], &[0.0, 0.0]);
        let b = period(5, vec![1.0], &[0.0]);
        assert!(concatenate_by_score(&[a, b]).is_err());
    }
}
