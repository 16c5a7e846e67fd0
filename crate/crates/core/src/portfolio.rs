//! Investor constraints as convex bodies, and portfolio-level statistics.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{embed_body, AffineEmbedding, ConvexBody, Ellipsoid, HPolytope};

/// Cross-sectional clamp applied after standardizing scores.
pub const WINSOR_LIMIT: f64 = 3.0;

/// A bound given either once for all assets or per asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundValues {
    All(f64),
    PerAsset(Vec<f64>),
}

impl BoundValues {
    fn resolve(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Self::All(v) => Ok(vec![*v; n]),
            Self::PerAsset(v) if v.len() == n => Ok(v.clone()),
            Self::PerAsset(v) => Err(Error::Dimension(format!("{what} lists {} values for {n} assets", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssetBounds {
    /// Weight limits in absolute terms.
    Absolute {
        #[serde(default)]
        lower: Option<BoundValues>,
        #[serde(default)]
        upper: Option<BoundValues>,
    },
    /// `|w_i - benchmark_i| <= band`, in weight units (0.02 = two percentage points).
    Relative { band: f64 },
}

/// Which assets a group constraint covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Members {
    Sector(String),
    Assets(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupBound {
    pub members: Members,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    /// Bounds are offsets from the benchmark's group weight.
    #[serde(default)]
    pub relative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorRef {
    Index(usize),
    Name(String),
}

/// `lower <= <w, beta_factor> <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorBound {
    pub factor: FactorRef,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    /// Bounds apply to the active exposure `<w - benchmark, beta>`.
    #[serde(default)]
    pub relative: bool,
}

/// `w^T Sigma w <= cap`; the cap defaults to a multiple of the benchmark variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceCap {
    #[serde(default)]
    pub cap: Option<f64>,
    #[serde(default = "one")]
    pub benchmark_multiple: f64,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    #[serde(default = "yes")]
    pub long_only: bool,
    #[serde(default = "one")]
    pub budget: f64,
    #[serde(default)]
    pub asset_bounds: Option<AssetBounds>,
    /// `|sector weight - benchmark sector weight| <= band` for every sector in the snapshot.
    #[serde(default)]
    pub sector_band: Option<f64>,
    #[serde(default)]
    pub group_bounds: Vec<GroupBound>,
    #[serde(default)]
    pub factor_bounds: Vec<FactorBound>,
    #[serde(default)]
    pub variance_cap: Option<VarianceCap>,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        Self {
            long_only: true,
            budget: 1.0,
            asset_bounds: None,
            sector_band: None,
            group_bounds: Vec::new(),
            factor_bounds: Vec::new(),
            variance_cap: None,
        }
    }
}

impl ConstraintSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Invalid(format!("constraint spec: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("constraint spec: {e}")))
    }

    fn check(&self) -> Result<()> {
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::Invalid(format!("budget must be positive, got {}", self.budget)));
        }
        let ordered = |what: &str, lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(l), Some(h)) if l > h => Err(Error::Invalid(format!("{what}: lower {l} exceeds upper {h}"))),
            _ => Ok(()),
        };
        for g in &self.group_bounds {
            ordered("group bound", g.lower, g.upper)?;
        }
        for f in &self.factor_bounds {
            ordered("factor bound", f.lower, f.upper)?;
        }
        if let Some(AssetBounds::Relative { band }) = &self.asset_bounds {
            if !(*band >= 0.0) {
                return Err(Error::Invalid(format!("asset band must be non-negative, got {band}")));
            }
        }
        if let Some(b) = self.sector_band {
            if !(b >= 0.0) {
                return Err(Error::Invalid(format!("sector band must be non-negative, got {b}")));
            }
        }
        if let Some(v) = &self.variance_cap {
            if v.cap.is_some_and(|c| !(c > 0.0)) || !(v.benchmark_multiple > 0.0) {
                return Err(Error::Invalid("variance cap must be positive".into()));
            }
        }
        Ok(())
    }

    fn uses_benchmark(&self) -> bool {
        matches!(self.asset_bounds, Some(AssetBounds::Relative { .. }))
            || self.sector_band.is_some()
            || self.group_bounds.iter().any(|g| g.relative)
            || self.factor_bounds.iter().any(|f| f.relative)
            || self.variance_cap.as_ref().is_some_and(|v| v.cap.is_none())
    }
}

/// Cross-section at one rebalance date.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSnapshot {
    pub asset_ids: Vec<String>,
    pub benchmark: DVector<f64>,
    pub mean_returns: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub factor_names: Vec<String>,
    /// Assets by factors.
    pub scores: DMatrix<f64>,
    pub sectors: Vec<String>,
}

impl MarketSnapshot {
    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_assets();
        if self.benchmark.len() != n
            || self.mean_returns.len() != n
            || self.covariance.shape() != (n, n)
            || self.scores.nrows() != n
            || self.scores.ncols() != self.factor_names.len()
            || self.sectors.len() != n
        {
            return Err(Error::Dimension(format!("snapshot fields disagree on the asset count {n}")));
        }
        let scale = self.covariance.amax().max(f64::MIN_POSITIVE);
        if (&self.covariance - self.covariance.transpose()).amax() > 1e-10 * scale {
            return Err(Error::Invalid("covariance is not symmetric".into()));
        }
        let min_eig = self.covariance.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(Error::Invalid(format!("covariance is not positive semidefinite ({min_eig:e})")));
        }
        Ok(())
    }

    fn factor_index(&self, f: &FactorRef) -> Result<usize> {
        match f {
            FactorRef::Index(i) if *i < self.factor_names.len() => Ok(*i),
            FactorRef::Index(i) => Err(Error::Invalid(format!("factor index {i} out of range"))),
            FactorRef::Name(name) => self
                .factor_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Invalid(format!("unknown factor {name:?}"))),
        }
    }

    fn members(&self, m: &Members) -> Result<Vec<usize>> {
        let idx: Vec<usize> = match m {
            Members::Sector(s) => (0..self.n_assets()).filter(|&i| &self.sectors[i] == s).collect(),
            Members::Assets(v) => v.clone(),
        };
        if idx.is_empty() || idx.iter().any(|&i| i >= self.n_assets()) {
            return Err(Error::Invalid(format!("group {m:?} selects no valid assets")));
        }
        Ok(idx)
    }

    /// Distinct sector labels in first-seen order.
    pub fn sector_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.sectors {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
        out
    }
}

/// Linear rows `a^T w <= b` tagged with the constraint group they came from.
struct Rows {
    a: Vec<DVector<f64>>,
    b: Vec<f64>,
    group: Vec<String>,
    /// Groups with a constant row `0 <= b` that fails.
    violated: Vec<String>,
}

impl Rows {
    fn push(&mut self, a: DVector<f64>, b: f64, group: &str) {
        if a.amax() == 0.0 {
            if b < 0.0 && !self.violated.iter().any(|g| g == group) {
                self.violated.push(group.to_string());
            }
            return;
        }
        self.a.push(a);
        self.b.push(b);
        self.group.push(group.to_string());
    }

    /// `lo <= a^T w <= hi` for the finite ends.
    fn interval(&mut self, a: DVector<f64>, lo: Option<f64>, hi: Option<f64>, group: &str) {
        if let Some(l) = lo.filter(|l| l.is_finite()) {
            self.push(-&a, -l, group);
        }
        if let Some(h) = hi.filter(|h| h.is_finite()) {
            self.push(a, h, group);
        }
    }
}

/// The constraint set in asset space, before the budget equality is removed.
struct Ambient {
    rows: Rows,
    /// `(Sigma, cap)`.
    variance: Option<(DMatrix<f64>, f64)>,
}

fn ambient_constraints(spec: &ConstraintSpec, snap: &MarketSnapshot) -> Result<Ambient> {
    let n = snap.n_assets();
    let unit = |i: usize| {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        e
    };
    let indicator = |idx: &[usize]| {
        let mut e = DVector::zeros(n);
        for &i in idx {
            e[i] = 1.0;
        }
        e
    };
    let mut rows = Rows { a: Vec::new(), b: Vec::new(), group: Vec::new(), violated: Vec::new() };

    // Per-asset bounds merged with the long-only floor, one row per side.
    let mut lower = vec![if spec.long_only { 0.0 } else { f64::NEG_INFINITY }; n];
    let mut upper = vec![f64::INFINITY; n];
    let mut asset_group = if spec.long_only { "long_only" } else { "asset_bounds" };
    match &spec.asset_bounds {
        None => {}
        Some(AssetBounds::Absolute { lower: lo, upper: hi }) => {
            asset_group = "asset_bounds";
            if let Some(lo) = lo {
                for (l, v) in lower.iter_mut().zip(lo.resolve(n, "lower")?) {
                    *l = l.max(v);
                }
            }
            if let Some(hi) = hi {
                upper = hi.resolve(n, "upper")?;
            }
        }
        Some(AssetBounds::Relative { band }) => {
            asset_group = "asset_bounds";
            for i in 0..n {
                let bm = snap.benchmark[i] * spec.budget;
                lower[i] = lower[i].max(bm - band);
                upper[i] = bm + band;
            }
        }
    }
    for i in 0..n {
        if lower[i] > upper[i] {
            return Err(Error::InfeasibleSpec { binding: vec![format!("asset_bounds[{}]", snap.asset_ids[i])] });
        }
        rows.interval(unit(i), Some(lower[i]), Some(upper[i]), asset_group);
    }

    if let Some(band) = spec.sector_band {
        for s in snap.sector_names() {
            let idx = snap.members(&Members::Sector(s.clone()))?;
            let bm: f64 = idx.iter().map(|&i| snap.benchmark[i]).sum::<f64>() * spec.budget;
            rows.interval(indicator(&idx), Some(bm - band), Some(bm + band), &format!("sector:{s}"));
        }
    }
    for (g, gb) in spec.group_bounds.iter().enumerate() {
        let idx = snap.members(&gb.members)?;
        let base = if gb.relative { idx.iter().map(|&i| snap.benchmark[i]).sum::<f64>() * spec.budget } else { 0.0 };
        let name = match &gb.members {
            Members::Sector(s) => format!("group:{s}"),
            Members::Assets(_) => format!("group:{g}"),
        };
        rows.interval(indicator(&idx), gb.lower.map(|l| base + l), gb.upper.map(|u| base + u), &name);
    }
    for fb in &spec.factor_bounds {
        let j = snap.factor_index(&fb.factor)?;
        let beta = snap.scores.column(j).into_owned();
        let base = if fb.relative { beta.dot(&snap.benchmark) * spec.budget } else { 0.0 };
        rows.interval(beta, fb.lower.map(|l| base + l), fb.upper.map(|u| base + u), &format!("factor:{}", snap.factor_names[j]));
    }

    let variance = match &spec.variance_cap {
        None => None,
        Some(v) => {
            let cap = match v.cap {
                Some(c) => c,
                None => {
                    let w = &snap.benchmark * spec.budget;
                    v.benchmark_multiple * w.dot(&(&snap.covariance * &w))
                }
            };
            Some((snap.covariance.clone(), cap))
        }
    };
    Ok(Ambient { rows, variance })
}

fn assemble(amb: &Ambient, skip: &[&str], n: usize, emb: &AffineEmbedding) -> Result<ConvexBody> {
    let keep: Vec<usize> = (0..amb.rows.b.len()).filter(|&j| !skip.contains(&amb.rows.group[j].as_str())).collect();
    let polytope = if keep.is_empty() {
        None
    } else {
        let a = DMatrix::from_fn(keep.len(), n, |r, c| amb.rows.a[keep[r]][c]);
        let b = DVector::from_fn(keep.len(), |r, _| amb.rows.b[keep[r]]);
        Some(HPolytope::new(a, b)?)
    };
    let ellipsoid = match &amb.variance {
        Some((sigma, cap)) if !skip.contains(&"variance_cap") => Some(Ellipsoid::new(sigma.clone(), *cap)?),
        _ => None,
    };
    if polytope.is_none() && ellipsoid.is_none() {
        return Err(Error::Unbounded("no constraint bounds the budget hyperplane".into()));
    }
    embed_body(&ConvexBody::new(polytope, ellipsoid)?, emb)?.certify()
}

fn is_emptiness(e: &Error) -> bool {
    matches!(e, Error::Infeasible(_) | Error::NotFullDimensional(_))
}

/// Body of feasible weights in budget-hyperplane coordinates, with the embedding that lifts them.
pub fn build_body(spec: &ConstraintSpec, snap: &MarketSnapshot) -> Result<(ConvexBody, AffineEmbedding)> {
    spec.check()?;
    snap.validate()?;
    let n = snap.n_assets();
    if n < 2 {
        return Err(Error::Invalid("at least two assets are required".into()));
    }
    if spec.uses_benchmark() {
        let s = snap.benchmark.sum();
        if (s - 1.0).abs() > 1e-8 || snap.benchmark.iter().any(|w| *w < 0.0) {
            return Err(Error::Invalid(format!("benchmark weights must lie on the simplex (sum {s})")));
        }
    }
    let emb = AffineEmbedding::budget(n, spec.budget)?;
    let amb = ambient_constraints(spec, snap)?;
    if !amb.rows.violated.is_empty() {
        return Err(Error::InfeasibleSpec { binding: amb.rows.violated.clone() });
    }
    match assemble(&amb, &[], n, &emb) {
        Ok(body) => Ok((body, emb)),
        Err(e) if is_emptiness(&e) => Err(probe_infeasibility(&amb, n, &emb)),
        Err(e) => Err(e),
    }
}

/// Drop constraint groups one at a time; report those whose removal restores
/// feasibility, or the greedily accumulated set when no single group suffices.
fn probe_infeasibility(amb: &Ambient, n: usize, emb: &AffineEmbedding) -> Error {
    let mut groups: Vec<&str> = Vec::new();
    for g in &amb.rows.group {
        if !groups.contains(&g.as_str()) {
            groups.push(g);
        }
    }
    if amb.variance.is_some() {
        groups.push("variance_cap");
    }
    let feasible = |skip: &[&str]| match assemble(amb, skip, n, emb) {
        Ok(_) => true,
        // Dropping the floor can make the body unbounded while non-empty.
        Err(Error::Unbounded(_)) => true,
        Err(_) => false,
    };
    let single: Vec<String> = groups.iter().filter(|g| feasible(&[**g])).map(|g| g.to_string()).collect();
    if !single.is_empty() {
        return Error::InfeasibleSpec { binding: single };
    }
    let mut dropped: Vec<&str> = Vec::new();
    for g in &groups {
        dropped.push(g);
        if feasible(&dropped) {
            break;
        }
    }
    Error::InfeasibleSpec { binding: dropped.iter().map(|g| g.to_string()).collect() }
}

/// Every constraint of `spec` evaluated at `w` in asset space: `(group, excess)`,
/// where a positive excess is a violation.
pub fn constraint_violations(spec: &ConstraintSpec, snap: &MarketSnapshot, w: &DVector<f64>) -> Result<Vec<(String, f64)>> {
    let amb = ambient_constraints(spec, snap)?;
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for j in 0..amb.rows.b.len() {
        let excess = amb.rows.a[j].dot(w) - amb.rows.b[j];
        let e = worst.entry(amb.rows.group[j].clone()).or_insert(f64::NEG_INFINITY);
        *e = e.max(excess);
    }
    if let Some((sigma, cap)) = &amb.variance {
        worst.insert("variance_cap".into(), w.dot(&(sigma * w)) - cap);
    }
    worst.insert("budget".into(), (w.sum() - spec.budget).abs());
    Ok(worst.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioStats {
    pub ret: f64,
    pub variance: f64,
    pub scores: Vec<f64>,
}

pub fn portfolio_stats(w: &DVector<f64>, snap: &MarketSnapshot) -> PortfolioStats {
    PortfolioStats {
        ret: w.dot(&snap.mean_returns),
        variance: w.dot(&(&snap.covariance * w)),
        scores: snap.scores.tr_mul(w).iter().copied().collect(),
    }
}

/// Standardize to z-scores (population standard deviation) and clamp at
/// `WINSOR_LIMIT`, within each sector when labels are given.
pub fn zscore_winsorize(raw: &DVector<f64>, sectors: Option<&[String]>) -> Result<DVector<f64>> {
    zscore(raw, sectors, Some(WINSOR_LIMIT))
}

/// Z-scores with an optional symmetric clamp.
pub fn zscore(raw: &DVector<f64>, sectors: Option<&[String]>, limit: Option<f64>) -> Result<DVector<f64>> {
    let n = raw.len();
    let groups: Vec<Vec<usize>> = match sectors {
        None => vec![(0..n).collect()],
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::Dimension(format!("{} sector labels for {n} values", labels.len())));
            }
            let mut by: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, l) in labels.iter().enumerate() {
                by.entry(l.as_str()).or_default().push(i);
            }
            by.into_values().collect()
        }
    };
    let mut out = DVector::zeros(n);
    for idx in groups {
        let m = idx.len() as f64;
        let mean = idx.iter().map(|&i| raw[i]).sum::<f64>() / m;
        let sd = (idx.iter().map(|&i| (raw[i] - mean).powi(2)).sum::<f64>() / m).sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            log::warn!("zero-variance score group of {} assets standardizes to zeros", idx.len());
            continue;
        }
        for &i in &idx {
            let z = (raw[i] - mean) / sd;
            out[i] = limit.map_or(z, |l| z.clamp(-l, l));
        }
    }
    Ok(out)
}
