//! Geometric random walks and the multi-chain sampler built on them.

mod ball;
mod barrier;
mod billiard;
mod hit_and_run;
mod hmc;
mod state;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::TargetDensity;
use crate::error::{Error, Result};
use crate::geometry::{chord, interior_point, AffineEmbedding, ConvexBody};

pub use ball::baw_step;
pub use barrier::{barrier_hessian, dikin_step, john_step, john_weights, john_weights_at, leverage_scores, vaidya_step};
pub use billiard::biw_step;
pub use hit_and_run::{cdhr_step, har_step};
pub use hmc::rehmc_step;
pub use state::WalkState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkKind {
    Baw,
    Har,
    Cdhr,
    Biw,
    Dikin,
    Vaidya,
    John,
    Rehmc,
}

impl WalkKind {
    pub const ALL: [WalkKind; 8] = [
        WalkKind::Baw,
        WalkKind::Har,
        WalkKind::Cdhr,
        WalkKind::Biw,
        WalkKind::Dikin,
        WalkKind::Vaidya,
        WalkKind::John,
        WalkKind::Rehmc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WalkKind::Baw => "baw",
            WalkKind::Har => "har",
            WalkKind::Cdhr => "cdhr",
            WalkKind::Biw => "biw",
            WalkKind::Dikin => "dikin",
            WalkKind::Vaidya => "vaidya",
            WalkKind::John => "john",
            WalkKind::Rehmc => "rehmc",
        }
    }

    pub fn uniform_only(self) -> bool {
        matches!(self, WalkKind::Biw | WalkKind::Dikin | WalkKind::Vaidya | WalkKind::John)
    }

    pub fn polytope_only(self) -> bool {
        matches!(self, WalkKind::Dikin | WalkKind::Vaidya | WalkKind::John)
    }

    /// Whether this walk can sample `target` over `body`; the error names the
    /// violated requirement.
    pub fn check_compatible(self, body: &ConvexBody, target: &TargetDensity) -> Result<()> {
        if self.uniform_only() && !target.is_uniform() {
            return Err(Error::Config(format!("{self} samples only the uniform distribution")));
        }
        if self.polytope_only() && (body.polytope().is_none() || body.ellipsoid().is_some()) {
            return Err(Error::Config(format!("{self} needs a polytope-only body")));
        }
        Ok(())
    }
}

impl fmt::Display for WalkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WalkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WalkKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown walk '{s}'")))
    }
}

fn default_leapfrog() -> usize {
    10
}
fn default_thinning() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_chord_iters() -> usize {
    10
}

/// Walk parameters. Unset tuning values are derived from the body at sampling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub kind: WalkKind,
    /// Ball-walk radius; default `4 r / sqrt(d)` with `r` the inner radius at the start.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Billiard trajectory scale; default the longest probed chord through the start.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Reflection cap; default `10 d`.
    #[serde(default)]
    pub rho: Option<usize>,
    /// Leapfrog step; when unset it is tuned during burn-in.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_leapfrog", alias = "L")]
    pub leapfrog: usize,
    /// Ellipsoid radius for Dikin (default 1), Vaidya and John walks (default 1.5).
    #[serde(default)]
    pub radius: Option<f64>,
    /// Steps discarded per chain; default `20 d`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fair-coin lazy steps for Vaidya and John walks.
    #[serde(default = "default_true")]
    pub lazy: bool,
    /// Stop leapfrog integration at a U-turn.
    #[serde(default)]
    pub uturn: bool,
    /// Inner Metropolis iterations on a chord for non-uniform targets.
    #[serde(default = "default_chord_iters")]
    pub chord_iters: usize,
}

impl WalkConfig {
    pub fn new(kind: WalkKind) -> Self {
        Self {
            kind,
            delta: None,
            tau: None,
            rho: None,
            eta: None,
            leapfrog: default_leapfrog(),
            radius: None,
            burn_in: None,
            thinning: 1,
            seed: 0,
            lazy: true,
            uturn: false,
            chord_iters: default_chord_iters(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn with_thinning(mut self, thinning: usize) -> Self {
        self.thinning = thinning;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::Config(format!("{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("delta", self.delta)?;
        positive("tau", self.tau)?;
        positive("eta", self.eta)?;
        positive("radius", self.radius)?;
        if self.rho == Some(0) {
            return Err(Error::Config("rho must be at least 1".into()));
        }
        if self.leapfrog == 0 {
            return Err(Error::Config("leapfrog count L must be at least 1".into()));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-chain bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainMeta {
    pub chain: usize,
    /// First row of this chain in `SampleSet::draws`.
    pub start_row: usize,
    pub len: usize,
    /// Fraction of post-burn-in steps that moved the chain.
    pub acceptance_rate: f64,
}

/// Draws from all chains, stacked chain after chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub draws: DMatrix<f64>,
    pub lifted: Option<DMatrix<f64>>,
    pub chains: Vec<ChainMeta>,
    pub kind: WalkKind,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.nrows() == 0
    }

    /// Draws of a single chain.
    pub fn chain(&self, i: usize) -> DMatrix<f64> {
        let m = &self.chains[i];
        self.draws.rows(m.start_row, m.len).into_owned()
    }

    /// Per-chain draw matrices, as the diagnostics expect them.
    pub fn chain_matrices(&self) -> Vec<DMatrix<f64>> {
        (0..self.chains.len()).map(|i| self.chain(i)).collect()
    }

    /// Map every draw to another space (e.g. asset weights) and keep the result in `lifted`.
    pub fn lift_with(mut self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Self {
        if self.draws.nrows() == 0 {
            self.lifted = Some(DMatrix::zeros(0, 0));
            return self;
        }
        let rows: Vec<DVector<f64>> = self.draws.row_iter().map(|r| f(&r.transpose())).collect();
        let n = rows[0].len();
        self.lifted = Some(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]));
        self
    }
}

/// Distance from `x` to the boundary, exact for facets and a lower bound for the ellipsoid.
pub fn inner_radius(body: &ConvexBody, x: &DVector<f64>) -> f64 {
    let mut r = f64::INFINITY;
    if let Some(p) = body.polytope() {
        let s = p.slacks(x);
        for j in 0..s.len() {
            r = r.min(s[j] / p.row_norms()[j]);
        }
    }
    if let Some(e) = body.ellipsoid() {
        let lmax = e.e().clone().symmetric_eigen().eigenvalues.max();
        r = r.min((e.c().sqrt() - e.quad(x).max(0.0).sqrt()) / lmax.sqrt());
    }
    r
}

/// Longest chord through `x` over the coordinate axes and `dim` random directions.
pub fn diameter_estimate(body: &ConvexBody, x: &DVector<f64>, seed: u64) -> Result<f64> {
    let d = body.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut best: f64 = 0.0;
    for i in 0..2 * d {
        let v = if i < d {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            e
        } else {
            let v = DVector::from_fn(d, |_, _| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng));
            v.normalize()
        };
        let (lo, hi) = chord(body, x, &v)?;
        best = best.max(hi - lo);
    }
    Ok(best)
}

/// Tuning values resolved against a concrete body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub delta: f64,
    pub tau: f64,
    pub rho: usize,
    pub eta: f64,
    pub tune_eta: bool,
    pub radius: f64,
    pub burn_in: usize,
}

pub fn resolve(cfg: &WalkConfig, body: &ConvexBody, start: &DVector<f64>) -> Result<Resolved> {
    cfg.validate()?;
    let d = body.dim();
    let r = inner_radius(body, start);
    let diameter = match (cfg.tau, cfg.kind) {
        (Some(t), _) => t,
        (None, WalkKind::Biw | WalkKind::Rehmc) => diameter_estimate(body, start, cfg.seed)?,
        _ => 2.0 * r,
    };
    Ok(Resolved {
        delta: cfg.delta.unwrap_or(4.0 * r / (d as f64).sqrt()),
        tau: cfg.tau.unwrap_or(diameter),
        rho: cfg.rho.unwrap_or(10 * d),
        eta: cfg.eta.unwrap_or(r),
        tune_eta: cfg.eta.is_none(),
        radius: cfg.radius.unwrap_or(match cfg.kind {
            WalkKind::Dikin => 1.0,
            _ => 1.5,
        }),
        burn_in: cfg.burn_in.unwrap_or(20 * d),
    })
}

/// One transition of the configured walk.
pub fn step(
    kind: WalkKind,
    body: &ConvexBody,
    target: &TargetDensity,
    state: &mut WalkState,
    cfg: &WalkConfig,
    tuned: &Resolved,
) -> Result<bool> {
    match kind {
        WalkKind::Baw => baw_step(body, target, state, tuned.delta),
        WalkKind::Har => har_step(body, target, state, cfg.chord_iters),
        WalkKind::Cdhr => cdhr_step(body, target, state, cfg.chord_iters),
        WalkKind::Biw => biw_step(body, state, tuned.tau, tuned.rho),
        WalkKind::Dikin => dikin_step(body, state, tuned.radius),
        WalkKind::Vaidya => vaidya_step(body, state, tuned.radius, cfg.lazy),
        WalkKind::John => john_step(body, state, tuned.radius, cfg.lazy),
        WalkKind::Rehmc => rehmc_step(body, target, state, tuned.eta, cfg.leapfrog, tuned.rho, cfg.uturn),
    }
}

/// Generator for chain `chain`: one seed, independent streams per chain.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

struct ChainOutput {
    draws: Vec<DVector<f64>>,
    moved: usize,
    steps: usize,
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    body: &ConvexBody,
    target: &TargetDensity,
    cfg: &WalkConfig,
    tuned: &Resolved,
    center: &DVector<f64>,
    chain: usize,
    count: usize,
) -> Result<ChainOutput> {
    let mut rng = chain_rng(cfg.seed, chain);
    let r = inner_radius(body, center);
    let d = body.dim();
    // Jitter inside a quarter of the inscribed ball around the center.
    let jitter = {
        use rand::Rng;
        let mut v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            v /= n;
        }
        let u: f64 = rng.random();
        v * (0.25 * r * u)
    };
    let mut start = center + jitter;
    if !target.log_density(&start).is_finite() {
        start = center.clone();
    }
    let mut state = WalkState::new(body, target, start, rng)?;
    let mut tuned = *tuned;

    let window = 25;
    let mut moved_in_window = 0;
    for i in 0..tuned.burn_in {
        moved_in_window += step(cfg.kind, body, target, &mut state, cfg, &tuned)? as usize;
        if tuned.tune_eta && cfg.kind == WalkKind::Rehmc && (i + 1) % window == 0 {
            let rate = moved_in_window as f64 / window as f64;
            if rate < 0.6 {
                tuned.eta *= 0.7;
            } else if rate > 0.9 {
                tuned.eta = (tuned.eta * 1.3).min(tuned.tau);
            }
            moved_in_window = 0;
        }
    }
    let mut draws = Vec::with_capacity(count);
    let mut moved = 0;
    let mut steps = 0;
    for _ in 0..count {
        for _ in 0..cfg.thinning {
            moved += step(cfg.kind, body, target, &mut state, cfg, &tuned)? as usize;
            steps += 1;
        }
        draws.push(state.current().clone());
    }
    Ok(ChainOutput { draws, moved, steps })
}

/// Draw `k` points split over `n_chains` independent chains.
pub fn sample(
    body: &ConvexBody,
    target: &TargetDensity,
    cfg: &WalkConfig,
    k: usize,
    n_chains: usize,
) -> Result<SampleSet> {
    if n_chains == 0 {
        return Err(Error::Config("at least one chain is required".into()));
    }
    cfg.kind.check_compatible(body, target)?;
    if let Some(n) = target.dim() {
        if n != body.dim() {
            return Err(Error::Dimension(format!("target lives in R^{n}, body in R^{}", body.dim())));
        }
    }
    let center = match body.certified_interior() {
        Some(x) => x.clone(),
        None => interior_point(body)?,
    };
    let tuned = resolve(cfg, body, &center)?;
    let counts: Vec<usize> = (0..n_chains).map(|c| k / n_chains + usize::from(c < k % n_chains)).collect();
    let outputs: Vec<Result<ChainOutput>> = (0..n_chains)
        .into_par_iter()
        .map(|c| run_chain(body, target, cfg, &tuned, &center, c, counts[c]))
        .collect();

    let d = body.dim();
    let mut draws = DMatrix::zeros(k, d);
    let mut chains = Vec::with_capacity(n_chains);
    let mut row = 0;
    for (c, out) in outputs.into_iter().enumerate() {
        let out = out?;
        chains.push(ChainMeta {
            chain: c,
            start_row: row,
            len: out.draws.len(),
            acceptance_rate: if out.steps > 0 { out.moved as f64 / out.steps as f64 } else { 0.0 },
        });
        for p in &out.draws {
            draws.set_row(row, &p.transpose());
            row += 1;
        }
    }
    Ok(SampleSet { draws, lifted: None, chains, kind: cfg.kind })
}

/// Sample in embedded coordinates and lift every draw back to asset space.
pub fn sample_embedded(
    body: &ConvexBody,
    emb: &AffineEmbedding,
    target: &TargetDensity,
    cfg: &WalkConfig,
    k: usize,
    n_chains: usize,
) -> Result<SampleSet> {
    Ok(sample(body, target, cfg, k, n_chains)?.lift_with(|y| emb.lift(y)))
}
