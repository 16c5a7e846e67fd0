//! Membership, boundary and reflection oracles.

use nalgebra::DVector;

use super::body::{ConvexBody, Ellipsoid, HPolytope};
use crate::error::{Error, Result};

/// Polytope and ellipsoid roots closer than this are treated as a tie; the facet wins.
const TIE_TOL: f64 = 1e-12;

/// Which part of the boundary a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitTag {
    Facet(usize),
    Ellipsoid,
}

/// First crossing of a ray with the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct HitRecord {
    pub t: f64,
    pub tag: HitTag,
    pub point: DVector<f64>,
}

fn check_dim(body: &ConvexBody, x: &DVector<f64>) -> Result<()> {
    if x.len() != body.dim() {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, body lives in R^{}",
            x.len(),
            body.dim()
        )));
    }
    Ok(())
}

/// `A x <= b + tol` on every row and `q(x) <= c + tol` for the parts that are present.
pub fn membership(body: &ConvexBody, x: &DVector<f64>, tol: f64) -> Result<bool> {
    check_dim(body, x)?;
    if let Some(p) = body.polytope() {
        let ax = p.a() * x;
        if ax.iter().zip(p.b().iter()).any(|(l, r)| *l > r + tol || l.is_nan()) {
            return Ok(false);
        }
    }
    if let Some(e) = body.ellipsoid() {
        let q = e.quad(x);
        if !(q <= e.c() + tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Smallest positive root of `t -> p + t v` against the polytope, given the slacks
/// `b - A p` and the directional products `A v`. Rows with `a_j^T v <= 0` never
/// block the ray; a slightly negative slack on a blocking row counts as an immediate hit.
pub(crate) fn polytope_forward(slack: &DVector<f64>, av: &DVector<f64>) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for j in 0..slack.len() {
        let d = av[j];
        if d > 0.0 {
            let t = slack[j].max(0.0) / d;
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, j));
            }
        }
    }
    best
}

/// Both roots of `a t^2 + b t + c0 = 0` in increasing order, computed without cancellation.
pub(crate) fn quadratic_roots(a: f64, b: f64, c0: f64) -> Option<(f64, f64)> {
    if a <= 0.0 {
        if b == 0.0 {
            return None;
        }
        let t = -c0 / b;
        return Some((t, t));
    }
    let disc = b * b - 4.0 * a * c0;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let q = if b >= 0.0 { -0.5 * (b + sq) } else { -0.5 * (b - sq) };
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c0 / q) };
    Some(if r1 <= r2 { (r1, r2) } else { (r2, r1) })
}

/// Chord parameters `(t_minus <= 0 <= t_plus)` of the line `p + t v` inside the ellipsoid.
pub(crate) fn ellipsoid_chord(e: &Ellipsoid, p: &DVector<f64>, v: &DVector<f64>) -> Option<(f64, f64)> {
    let d = p - e.center();
    let ev = e.e() * v;
    let a = v.dot(&ev);
    if a <= 0.0 {
        return None;
    }
    let b = 2.0 * d.dot(&ev);
    let c0 = d.dot(&(e.e() * &d)) - e.c();
    quadratic_roots(a, b, c0)
}

/// Forward boundary crossing from a point the caller knows to be inside.
pub(crate) fn forward_hit(body: &ConvexBody, p: &DVector<f64>, v: &DVector<f64>) -> Option<(f64, HitTag)> {
    let facet = body.polytope().and_then(|poly| {
        let slack = poly.slacks(p);
        let av = poly.a() * v;
        polytope_forward(&slack, &av)
    });
    let ell = body
        .ellipsoid()
        .and_then(|e| ellipsoid_chord(e, p, v))
        .map(|(_, hi)| hi.max(0.0));
    pick_hit(facet, ell)
}

pub(crate) fn pick_hit(facet: Option<(f64, usize)>, ell: Option<f64>) -> Option<(f64, HitTag)> {
    match (facet, ell) {
        (None, None) => None,
        (Some((t, j)), None) => Some((t, HitTag::Facet(j))),
        (None, Some(t)) => Some((t, HitTag::Ellipsoid)),
        (Some((tf, j)), Some(te)) => {
            if tf <= te + TIE_TOL {
                Some((tf, HitTag::Facet(j)))
            } else {
                Some((te, HitTag::Ellipsoid))
            }
        }
    }
}

/// Smallest `t > 0` such that `p + t v` lies on the boundary.
pub fn boundary_oracle(body: &ConvexBody, p: &DVector<f64>, v: &DVector<f64>) -> Result<HitRecord> {
    check_dim(body, p)?;
    check_dim(body, v)?;
    if !(v.norm() > 0.0) {
        return Err(Error::Invalid("direction must be nonzero".into()));
    }
    let slack = body.min_slack(p);
    if !(slack > 0.0) {
        return Err(Error::DegenerateStart { slack });
    }
    let (t, tag) = forward_hit(body, p, v).ok_or(Error::UnboundedRay)?;
    Ok(HitRecord { t, tag, point: p + v * t })
}

/// Full chord `[t_minus, t_plus]` of the line `p + t v` through an interior point.
pub fn chord(body: &ConvexBody, p: &DVector<f64>, v: &DVector<f64>) -> Result<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    if let Some(poly) = body.polytope() {
        let slack = poly.slacks(p);
        let av = poly.a() * v;
        chord_from_cache(&slack, &av, &mut lo, &mut hi);
    }
    if let Some(e) = body.ellipsoid() {
        if let Some((l, h)) = ellipsoid_chord(e, p, v) {
            lo = lo.max(l.min(0.0));
            hi = hi.min(h.max(0.0));
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::UnboundedRay);
    }
    Ok((lo, hi))
}

pub(crate) fn chord_from_cache(slack: &DVector<f64>, av: &DVector<f64>, lo: &mut f64, hi: &mut f64) {
    for j in 0..slack.len() {
        let d = av[j];
        let s = slack[j].max(0.0);
        if d > 0.0 {
            *hi = hi.min(s / d);
        } else if d < 0.0 {
            *lo = lo.max(s / d);
        }
    }
}

/// Unit outward normal at a boundary hit.
pub fn normal_at(body: &ConvexBody, hit: &HitRecord) -> Result<DVector<f64>> {
    match hit.tag {
        HitTag::Facet(j) => {
            let poly: &HPolytope = body
                .polytope()
                .ok_or_else(|| Error::Invalid("facet hit on a body without a polytope".into()))?;
            if j >= poly.num_facets() {
                return Err(Error::Invalid(format!("facet index {j} out of range")));
            }
            Ok(poly.a().row(j).transpose() / poly.row_norms()[j])
        }
        HitTag::Ellipsoid => {
            let e = body
                .ellipsoid()
                .ok_or_else(|| Error::Invalid("ellipsoid hit on a body without an ellipsoid".into()))?;
            ellipsoid_normal(e, &hit.point)
        }
    }
}

pub(crate) fn ellipsoid_normal(e: &Ellipsoid, y: &DVector<f64>) -> Result<DVector<f64>> {
    let g = e.e() * (y - e.center());
    let n = g.norm();
    if !(n > 0.0) {
        return Err(Error::DegenerateBoundary);
    }
    Ok(g / n)
}

/// Specular reflection `v - 2 <v, s> s` for a unit normal `s`.
pub fn reflect(v: &DVector<f64>, s: &DVector<f64>) -> DVector<f64> {
    v - s * (2.0 * v.dot(s))
}
