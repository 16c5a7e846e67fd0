//! Multiphase isotropic rounding.
//!
//! Each phase samples the current body, whitens the sample covariance and
//! composes the whitening map into the running transform. Points in the
//! rounded space map back with `x = lmap * y + shift`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::densities::TargetDensity;
use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, Ellipsoid, HPolytope};
use crate::walks::{sample, WalkConfig, WalkKind};

/// Spectrum ratio that counts as isotropic enough.
pub const ISOTROPY_TARGET: f64 = 4.0;
pub const DEFAULT_MAX_PHASES: usize = 10;
const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingTransform {
    #[serde(with = "crate::serde_mat::matrix")]
    pub lmap: DMatrix<f64>,
    #[serde(with = "crate::serde_mat::vector")]
    pub shift: DVector<f64>,
    /// `ln |det lmap|`.
    pub log_det: f64,
}

impl RoundingTransform {
    pub fn identity(d: usize) -> Self {
        Self { lmap: DMatrix::identity(d, d), shift: DVector::zeros(d), log_det: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// Rounded coordinates to original coordinates.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.lmap * y + &self.shift
    }

    /// Original coordinates to rounded coordinates.
    pub fn invert(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.lmap
            .clone()
            .lu()
            .solve(&(x - &self.shift))
            .ok_or_else(|| Error::Singular("rounding map".into()))
    }

    /// `self` after `inner`: `y -> self.apply(inner.apply(y))`.
    pub fn compose(&self, inner: &Self) -> Self {
        Self {
            lmap: &self.lmap * &inner.lmap,
            shift: &self.lmap * &inner.shift + &self.shift,
            log_det: self.log_det + inner.log_det,
        }
    }

    /// Express a body given in original coordinates in rounded coordinates.
    pub fn transform_body(&self, body: &ConvexBody) -> Result<ConvexBody> {
        let polytope = match body.polytope() {
            Some(p) => Some(HPolytope::new(p.a() * &self.lmap, p.b() - p.a() * &self.shift)?),
            None => None,
        };
        let ellipsoid = match body.ellipsoid() {
            Some(e) => {
                let m = self.lmap.transpose() * e.e() * &self.lmap;
                let m = (&m + m.transpose()) * 0.5;
                Some(Ellipsoid::with_center(m, e.c(), self.invert(e.center())?)?)
            }
            None => None,
        };
        ConvexBody::new(polytope, ellipsoid)
    }

    pub fn transform_target(&self, target: &TargetDensity) -> Result<TargetDensity> {
        TargetDensity::pullback(target.clone(), self.lmap.clone(), self.shift.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotropyReport {
    #[serde(with = "crate::serde_mat::vector")]
    pub mean: DVector<f64>,
    #[serde(with = "crate::serde_mat::matrix")]
    pub covariance: DMatrix<f64>,
    /// `lambda_max / lambda_min`; infinite when the covariance is singular.
    pub ratio: f64,
}

/// Sample mean, unbiased covariance and extreme-eigenvalue ratio of the rows of `samples`.
pub fn isotropy_report(samples: &DMatrix<f64>) -> Result<IsotropyReport> {
    let (k, d) = samples.shape();
    if d == 0 || k < d + 1 {
        return Err(Error::InsufficientData(format!("{k} samples in dimension {d}, need at least {}", d + 1)));
    }
    let mean = samples.row_mean().transpose();
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let covariance = centered.tr_mul(&centered) / (k as f64 - 1.0);
    let eig = covariance.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let ratio = if hi > 0.0 && lo > EIGEN_FLOOR * hi { hi / lo } else { f64::INFINITY };
    Ok(IsotropyReport { mean, covariance, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub samples: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct Rounded {
    pub transform: RoundingTransform,
    pub body: ConvexBody,
    pub target: TargetDensity,
    /// Spectrum ratio measured at the start of each phase, in rounded coordinates.
    pub phases: Vec<PhaseRecord>,
    pub converged: bool,
}

impl Rounded {
    pub fn final_ratio(&self) -> f64 {
        self.phases.last().map_or(f64::INFINITY, |p| p.ratio)
    }
}

/// Whitening map `z -> mean + V sqrt(Lambda) z` of a sample covariance.
fn whitening(report: &IsotropyReport, frame: &RoundingTransform) -> Result<RoundingTransform> {
    let eig = report.covariance.clone().symmetric_eigen();
    let hi = eig.eigenvalues.max();
    let (imin, lo) = eig.eigenvalues.argmin();
    if !(hi > 0.0) || lo <= EIGEN_FLOOR * hi {
        let dir = &frame.lmap * eig.eigenvectors.column(imin);
        let dir = dir.normalize();
        return Err(Error::NotFullDimensional(format!(
            "sample covariance is rank-deficient along {:?}",
            dir.iter().map(|v| (v * 1e6).round() / 1e6).collect::<Vec<_>>()
        )));
    }
    let sqrt = eig.eigenvalues.map(f64::sqrt);
    let lmap = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt);
    let log_det = sqrt.iter().map(|s| s.ln()).sum();
    Ok(RoundingTransform { lmap, shift: report.mean.clone(), log_det })
}

/// Round `body` (and `target`) towards isotropic position.
///
/// Phases sample with the billiard walk for uniform targets and reflective
/// HMC otherwise; tuning values in `walk_cfg` are ignored since they refer to
/// the unrounded scale. `n_chains` starting points are used per phase.
pub fn round_isotropic(
    body: &ConvexBody,
    target: &TargetDensity,
    walk_cfg: &WalkConfig,
    max_phases: usize,
    n_chains: usize,
) -> Result<Rounded> {
    if max_phases == 0 {
        return Err(Error::Config("at least one rounding phase is required".into()));
    }
    let d = body.dim();
    let per_phase = (20 * d).max(1000);
    let mut cfg = WalkConfig {
        kind: if target.is_uniform() { WalkKind::Biw } else { WalkKind::Rehmc },
        delta: None,
        tau: None,
        eta: None,
        radius: None,
        ..walk_cfg.clone()
    };

    let mut transform = RoundingTransform::identity(d);
    let mut current_body = body.clone().certify()?;
    let mut current_target = target.clone();
    let mut phases = Vec::new();
    let mut converged = false;
    for phase in 0..max_phases {
        cfg.seed = walk_cfg.seed.wrapping_add(phase as u64);
        let draws = sample(&current_body, &current_target, &cfg, per_phase, n_chains)?;
        let report = isotropy_report(&draws.draws)?;
        log::debug!("rounding phase {phase}: spectrum ratio {:.3}", report.ratio);
        phases.push(PhaseRecord { samples: per_phase, ratio: report.ratio });
        if report.ratio <= ISOTROPY_TARGET {
            converged = true;
            break;
        }
        let step = whitening(&report, &transform)?;
        current_body = step.transform_body(&current_body)?.certify()?;
        current_target = step.transform_target(&current_target)?;
        transform = transform.compose(&step);
    }
    if !converged {
        log::warn!("rounding stopped after {max_phases} phases above the isotropy target");
    }
    Ok(Rounded { transform, body: current_body, target: current_target, phases, converged })
}
