use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{pick_hit, polytope_forward, quadratic_roots, reflect, ConvexBody, HitTag};

use super::state::WalkState;

/// Forward hit of `p + t v` from the cached products; `None` means the ray
/// never leaves the body.
pub(crate) fn cached_forward_hit(
    body: &ConvexBody,
    state: &WalkState,
    v: &DVector<f64>,
    av: Option<&DVector<f64>>,
    ev: Option<&DVector<f64>>,
) -> Option<(f64, HitTag)> {
    let facet = match (state.slacks(body), av) {
        (Some(slack), Some(av)) => polytope_forward(&slack, av),
        _ => None,
    };
    let ell = match (body.ellipsoid(), state.ellipsoid_cache(), ev) {
        (Some(e), Some(ed), Some(ev)) => {
            let d = state.current() - e.center();
            quadratic_roots(v.dot(ev), 2.0 * v.dot(ed), d.dot(ed) - e.c()).map(|(_, hi)| hi.max(0.0))
        }
        _ => None,
    };
    pick_hit(facet, ell)
}

/// Unit outward normal at the current point for a hit tag, from the caches.
pub(crate) fn cached_normal(body: &ConvexBody, state: &WalkState, tag: HitTag) -> Result<DVector<f64>> {
    match tag {
        HitTag::Facet(j) => {
            let p = body.polytope().expect("facet hit implies a polytope");
            Ok(p.a().row(j).transpose() / p.row_norms()[j])
        }
        HitTag::Ellipsoid => {
            let g = state.ellipsoid_cache().expect("ellipsoid hit implies a quadric");
            let n = g.norm();
            if !(n > 0.0) {
                return Err(Error::DegenerateBoundary);
            }
            Ok(g / n)
        }
    }
}

/// Update `A v` after reflecting `v` off facet `j` using the Gram matrix `A A^T`:
/// `A v' = A v - 2 (a_j^T v / ||a_j||^2) A a_j`.
fn reflect_products(body: &ConvexBody, state: &mut WalkState, av: &mut DVector<f64>, j: usize) {
    let p = body.polytope().expect("facet hit implies a polytope");
    if state.gram.is_none() {
        state.gram = Some(p.a() * p.a().transpose());
    }
    let g = state.gram.as_ref().expect("just built");
    let nj2 = p.row_norms()[j] * p.row_norms()[j];
    let f = 2.0 * av[j] / nj2;
    av.axpy(-f, &g.column(j), 1.0);
}

/// Travel `length` from the current point along `v` (any norm), reflecting
/// at the boundary. Returns `false` when more than `rho` reflections would be
/// needed; the state is then left at the last reflection point and the caller
/// is responsible for restoring it. `v` holds the final direction.
pub(crate) fn reflective_flight(
    body: &ConvexBody,
    state: &mut WalkState,
    v: &mut DVector<f64>,
    mut length: f64,
    rho: usize,
) -> Result<bool> {
    let mut av = body.polytope().map(|p| p.a() * &*v);
    let mut ev = body.ellipsoid().map(|e| e.e() * &*v);
    let mut reflections = 0;
    loop {
        let hit = cached_forward_hit(body, state, v, av.as_ref(), ev.as_ref());
        let Some((t, tag)) = hit else {
            if body.dim() > 0 {
                return Err(Error::UnboundedRay);
            }
            return Ok(true);
        };
        if length <= t {
            state.advance(body, v, av.as_ref(), ev.as_ref(), length);
            return Ok(true);
        }
        if reflections == rho {
            return Ok(false);
        }
        state.advance(body, v, av.as_ref(), ev.as_ref(), t);
        length -= t;
        let s = cached_normal(body, state, tag)?;
        let proj = v.dot(&s);
        *v = reflect(v, &s);
        match tag {
            HitTag::Facet(j) => {
                if let Some(av) = av.as_mut() {
                    reflect_products(body, state, av, j);
                }
                if let (Some(e), Some(ev)) = (body.ellipsoid(), ev.as_mut()) {
                    ev.axpy(-2.0 * proj, &(e.e() * &s), 1.0);
                }
            }
            HitTag::Ellipsoid => {
                av = body.polytope().map(|p| p.a() * &*v);
                ev = body.ellipsoid().map(|e| e.e() * &*v);
            }
        }
        reflections += 1;
    }
}

/// Billiard walk step for the uniform target: trajectory length
/// `L = -tau ln(eta)` with at most `rho` reflections; overflow returns to the start.
pub fn biw_step(body: &ConvexBody, state: &mut WalkState, tau: f64, rho: usize) -> Result<bool> {
    let d = body.dim();
    let u = state.uniform();
    let length = -tau * (1.0 - u).ln();
    let mut v = state.unit_direction(d);
    let start = state.current().clone();
    if reflective_flight(body, state, &mut v, length, rho)? {
        Ok(true)
    } else {
        let lp = state.log_pi;
        state.jump(body, start, lp);
        Ok(false)
    }
}
