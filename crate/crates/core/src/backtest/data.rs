//! Market data, its CSV form, and a point-in-time view that records every access.

use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Daily discrete total returns plus dated cross-sections of scores and benchmark weights.
///
/// Missing returns are `NaN`. Cross-sections are as-of snapshots: the one
/// stamped `d` is known at the close of `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    pub dates: Vec<NaiveDate>,
    pub asset_ids: Vec<String>,
    /// Dates by assets.
    pub returns: DMatrix<f64>,
    pub factor_names: Vec<String>,
    /// Raw scores (assets by factors) per stamp date; `NaN` marks a missing score.
    pub scores: BTreeMap<NaiveDate, DMatrix<f64>>,
    /// Benchmark weights per stamp date; zero means not in the benchmark.
    pub benchmark: BTreeMap<NaiveDate, DVector<f64>>,
    pub sectors: Vec<String>,
}

impl MarketData {
    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (t, n) = (self.dates.len(), self.n_assets());
        if self.returns.shape() != (t, n) || self.sectors.len() != n {
            return Err(Error::Dimension(format!("market data has {t} dates and {n} assets but returns are {:?}", self.returns.shape())));
        }
        if self.dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("dates must be strictly increasing".into()));
        }
        for (d, s) in &self.scores {
            if s.shape() != (n, self.factor_names.len()) {
                return Err(Error::Dimension(format!("scores at {d} have shape {:?}", s.shape())));
            }
        }
        for (d, b) in &self.benchmark {
            if b.len() != n {
                return Err(Error::Dimension(format!("benchmark at {d} has {} weights", b.len())));
            }
        }
        for j in 0..n {
            let col = self.returns.column(j);
            let first = col.iter().position(|r| !r.is_nan());
            let last = col.iter().rposition(|r| !r.is_nan());
            if let (Some(a), Some(b)) = (first, last) {
                if col.rows(a, b - a + 1).iter().any(|r| r.is_nan()) {
                    return Err(Error::Invalid(format!("asset {} has a return gap inside its active window", self.asset_ids[j])));
                }
                if col.iter().any(|r| *r <= -1.0) {
                    return Err(Error::Invalid(format!("asset {} has a return of -100% or worse", self.asset_ids[j])));
                }
            }
        }
        Ok(())
    }

    pub fn date_index(&self, d: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&d).ok()
    }

    /// Read `returns.csv`, `scores.csv`, `benchmark.csv` and optional `sectors.csv` from a directory.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let returns: Vec<ReturnRow> = read_csv(&dir.join("returns.csv"))?;
        let scores: Vec<ScoreRow> = read_csv(&dir.join("scores.csv"))?;
        let bench: Vec<WeightRow> = read_csv(&dir.join("benchmark.csv"))?;
        let sector_path = dir.join("sectors.csv");
        let sectors: Vec<SectorRow> = if sector_path.exists() { read_csv(&sector_path)? } else { Vec::new() };

        let mut ids: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |id: &str, ids: &mut Vec<String>| -> usize {
            *index.entry(id.to_string()).or_insert_with(|| {
                ids.push(id.to_string());
                ids.len() - 1
            })
        };
        // The sector file lists every asset once, so it fixes the column order when present.
        let sector_cells: Vec<(usize, String)> = sectors.iter().map(|s| (intern(&s.asset_id, &mut ids), s.sector.clone())).collect();
        let mut dates: Vec<NaiveDate> = returns.iter().map(|r| r.date).collect();
        dates.sort();
        dates.dedup();
        let cells: Vec<(usize, usize, f64)> = returns
            .iter()
            .map(|r| (dates.binary_search(&r.date).expect("date collected above"), intern(&r.asset_id, &mut ids), r.r#return))
            .collect();
        let score_cells: Vec<(NaiveDate, usize, String, f64)> =
            scores.iter().map(|s| (s.date, intern(&s.asset_id, &mut ids), s.factor.clone(), s.score)).collect();
        let bench_cells: Vec<(NaiveDate, usize, f64)> = bench.iter().map(|w| (w.date, intern(&w.asset_id, &mut ids), w.weight)).collect();

        let n = ids.len();
        let mut ret = DMatrix::from_element(dates.len(), n, f64::NAN);
        for (t, j, r) in cells {
            ret[(t, j)] = r;
        }
        let mut factor_names: Vec<String> = Vec::new();
        for (_, _, f, _) in &score_cells {
            if !factor_names.contains(f) {
                factor_names.push(f.clone());
            }
        }
        let mut score_map: BTreeMap<NaiveDate, DMatrix<f64>> = BTreeMap::new();
        for (d, j, f, s) in score_cells {
            let k = factor_names.iter().position(|x| *x == f).expect("factor collected above");
            score_map.entry(d).or_insert_with(|| DMatrix::from_element(n, factor_names.len(), f64::NAN))[(j, k)] = s;
        }
        let mut bench_map: BTreeMap<NaiveDate, DVector<f64>> = BTreeMap::new();
        for (d, j, w) in bench_cells {
            bench_map.entry(d).or_insert_with(|| DVector::zeros(n))[j] = w;
        }
        let mut sector_vec = vec!["unassigned".to_string(); n];
        for (j, s) in sector_cells {
            sector_vec[j] = s;
        }
        let data = Self {
            dates,
            asset_ids: ids,
            returns: ret,
            factor_names,
            scores: score_map,
            benchmark: bench_map,
            sectors: sector_vec,
        };
        data.validate()?;
        Ok(data)
    }

    /// Write the four CSV files into `dir` (created if needed).
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv_writer(&dir.join("returns.csv"))?;
        for (t, d) in self.dates.iter().enumerate() {
            for (j, id) in self.asset_ids.iter().enumerate() {
                let r = self.returns[(t, j)];
                if !r.is_nan() {
                    w.serialize(ReturnRow { date: *d, asset_id: id.clone(), r#return: r }).map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        let mut w = csv_writer(&dir.join("scores.csv"))?;
        for (d, s) in &self.scores {
            for (j, id) in self.asset_ids.iter().enumerate() {
                for (k, f) in self.factor_names.iter().enumerate() {
                    if !s[(j, k)].is_nan() {
                        w.serialize(ScoreRow { date: *d, asset_id: id.clone(), factor: f.clone(), score: s[(j, k)] }).map_err(csv_err)?;
                    }
                }
            }
        }
        w.flush()?;
        let mut w = csv_writer(&dir.join("benchmark.csv"))?;
        for (d, b) in &self.benchmark {
            for (j, id) in self.asset_ids.iter().enumerate() {
                if b[j] > 0.0 {
                    w.serialize(WeightRow { date: *d, asset_id: id.clone(), weight: b[j] }).map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        let mut w = csv_writer(&dir.join("sectors.csv"))?;
        for (id, s) in self.asset_ids.iter().zip(&self.sectors) {
            w.serialize(SectorRow { asset_id: id.clone(), sector: s.clone() }).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ReturnRow {
    date: NaiveDate,
    asset_id: String,
    r#return: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    date: NaiveDate,
    asset_id: String,
    factor: String,
    score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightRow {
    date: NaiveDate,
    asset_id: String,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SectorRow {
    asset_id: String,
    sector: String,
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Invalid(format!("csv: {other:?}")),
    }
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    // `#` lines carry metadata such as the schema version.
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(csv_err)?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Invalid(format!("{}: {e}", path.display()))))
        .collect()
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

/// Read-only view of the data as known at the close of `dates[as_of]`.
///
/// Every accessor checks the cutoff and records the latest date touched, so
/// tests can assert that no rebalance decision used later information.
pub struct PointInTime<'a> {
    data: &'a MarketData,
    as_of: usize,
    latest: Cell<Option<NaiveDate>>,
}

impl<'a> PointInTime<'a> {
    pub fn new(data: &'a MarketData, as_of: usize) -> Self {
        Self { data, as_of, latest: Cell::new(None) }
    }

    pub fn date(&self) -> NaiveDate {
        self.data.dates[self.as_of]
    }

    fn touch(&self, d: NaiveDate) {
        assert!(d <= self.date(), "look-ahead: accessed {d} at {}", self.date());
        if self.latest.get().is_none_or(|l| d > l) {
            self.latest.set(Some(d));
        }
    }

    /// Latest date any accessor has read.
    pub fn latest_access(&self) -> Option<NaiveDate> {
        self.latest.get()
    }

    /// The `len` most recent return rows, ending at the cutoff date.
    pub fn trailing_returns(&self, len: usize) -> Option<DMatrix<f64>> {
        if len == 0 || len > self.as_of + 1 {
            return None;
        }
        let start = self.as_of + 1 - len;
        self.touch(self.data.dates[self.as_of]);
        Some(self.data.returns.rows(start, len).into_owned())
    }

    fn as_of_entry<T: Clone>(&self, map: &BTreeMap<NaiveDate, T>) -> Option<T> {
        let (d, v) = map.range(..=self.date()).next_back()?;
        self.touch(*d);
        Some(v.clone())
    }

    /// Latest score cross-section stamped on or before the cutoff.
    pub fn scores(&self) -> Option<DMatrix<f64>> {
        self.as_of_entry(&self.data.scores)
    }

    pub fn benchmark(&self) -> Option<DVector<f64>> {
        self.as_of_entry(&self.data.benchmark)
    }

    pub fn data(&self) -> &MarketData {
        self.data
    }
}
