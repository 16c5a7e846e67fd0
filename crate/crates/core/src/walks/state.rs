use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::densities::TargetDensity;
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;

/// Moves between full recomputations of the cached products.
const REFRESH_EVERY: usize = 64;

/// Current point of one chain plus the products walks update incrementally:
/// `A p` for the facets and `E (p - c0)` for the ellipsoid.
#[derive(Debug, Clone)]
pub struct WalkState {
    current: DVector<f64>,
    ap: Option<DVector<f64>>,
    ed: Option<DVector<f64>>,
    pub(crate) log_pi: f64,
    pub(crate) gram: Option<DMatrix<f64>>,
    pub(crate) john_weights: Option<DVector<f64>>,
    /// Factored local metric of the barrier walks, keyed by the point it belongs to.
    pub(crate) metric: Option<(DVector<f64>, Cholesky<f64, Dyn>)>,
    moves: usize,
    rng: ChaCha8Rng,
}

impl WalkState {
    /// The start must lie strictly inside the body and inside the target's support.
    pub fn new(body: &ConvexBody, target: &TargetDensity, start: DVector<f64>, rng: ChaCha8Rng) -> Result<Self> {
        if start.len() != body.dim() {
            return Err(Error::Dimension(format!(
                "start has {} coordinates, body lives in R^{}",
                start.len(),
                body.dim()
            )));
        }
        let slack = body.min_slack(&start);
        if !(slack > 0.0) {
            return Err(Error::DegenerateStart { slack });
        }
        let log_pi = target.log_density(&start);
        if !log_pi.is_finite() {
            return Err(Error::Invalid("start point lies outside the target's support".into()));
        }
        let mut s = Self {
            current: start,
            ap: None,
            ed: None,
            log_pi,
            gram: None,
            john_weights: None,
            metric: None,
            moves: 0,
            rng,
        };
        s.refresh(body);
        Ok(s)
    }

    pub fn current(&self) -> &DVector<f64> {
        &self.current
    }

    /// Cached `A p`, if the body has facets.
    pub fn cached_ap(&self) -> Option<&DVector<f64>> {
        self.ap.as_ref()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Recompute every cached product from scratch.
    pub fn refresh(&mut self, body: &ConvexBody) {
        self.ap = body.polytope().map(|p| p.a() * &self.current);
        self.ed = body.ellipsoid().map(|e| e.e() * (&self.current - e.center()));
        self.moves = 0;
    }

    pub(crate) fn slacks(&self, body: &ConvexBody) -> Option<DVector<f64>> {
        match (body.polytope(), &self.ap) {
            (Some(p), Some(ap)) => Some(p.b() - ap),
            _ => None,
        }
    }

    pub(crate) fn ellipsoid_cache(&self) -> Option<&DVector<f64>> {
        self.ed.as_ref()
    }

    /// `p <- p + t v` given `A v` and `E v`.
    pub(crate) fn advance(
        &mut self,
        body: &ConvexBody,
        v: &DVector<f64>,
        av: Option<&DVector<f64>>,
        ev: Option<&DVector<f64>>,
        t: f64,
    ) {
        self.current.axpy(t, v, 1.0);
        if let (Some(ap), Some(av)) = (self.ap.as_mut(), av) {
            ap.axpy(t, av, 1.0);
        }
        if let (Some(ed), Some(ev)) = (self.ed.as_mut(), ev) {
            ed.axpy(t, ev, 1.0);
        }
        self.moves += 1;
        if self.moves >= REFRESH_EVERY {
            self.refresh(body);
        }
    }

    /// Jump to an arbitrary point, recomputing caches.
    pub(crate) fn jump(&mut self, body: &ConvexBody, y: DVector<f64>, log_pi: f64) {
        self.current = y;
        self.log_pi = log_pi;
        self.refresh(body);
    }

    pub(crate) fn normal_vector(&mut self, d: usize) -> DVector<f64> {
        DVector::from_fn(d, |_, _| self.rng.sample::<f64, _>(StandardNormal))
    }

    pub(crate) fn unit_direction(&mut self, d: usize) -> DVector<f64> {
        loop {
            let v = self.normal_vector(d);
            let n = v.norm();
            if n > 1e-300 {
                return v / n;
            }
        }
    }

    /// Uniform point in the unit ball.
    pub(crate) fn in_unit_ball(&mut self, d: usize) -> DVector<f64> {
        let u: f64 = self.rng.random();
        self.unit_direction(d) * u.powf(1.0 / d as f64)
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Metropolis coin for a log acceptance ratio.
    pub(crate) fn accept(&mut self, log_alpha: f64) -> bool {
        if log_alpha >= 0.0 {
            return true;
        }
        if log_alpha.is_nan() {
            return false;
        }
        let u: f64 = self.rng.random();
        u.ln() < log_alpha
    }
}
