use nalgebra::DVector;

use crate::densities::TargetDensity;
use crate::error::{Error, Result};
use crate::geometry::{chord_from_cache, quadratic_roots, ConvexBody};

use super::state::WalkState;

const MIN_CHORD: f64 = 1e-12;
const MAX_RETRIES: usize = 100;

/// Chord `[lo, hi]` of `p + t v` from the cached products.
pub(crate) fn cached_chord(
    body: &ConvexBody,
    state: &WalkState,
    v: &DVector<f64>,
    av: Option<&DVector<f64>>,
    ev: Option<&DVector<f64>>,
) -> Result<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    if let (Some(slack), Some(av)) = (state.slacks(body), av) {
        chord_from_cache(&slack, av, &mut lo, &mut hi);
    }
    if let (Some(e), Some(ed), Some(ev)) = (body.ellipsoid(), state.ellipsoid_cache(), ev) {
        let d = state.current() - e.center();
        let a = v.dot(ev);
        let b = 2.0 * v.dot(ed);
        let c0 = d.dot(ed) - e.c();
        if let Some((l, h)) = quadratic_roots(a, b, c0) {
            lo = lo.max(l.min(0.0));
            hi = hi.min(h.max(0.0));
        } else {
            // Roundoff put p outside the quadric; stay put this step.
            lo = lo.max(0.0);
            hi = hi.min(0.0);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::UnboundedRay);
    }
    Ok((lo, hi))
}

/// Pick a point on the chord: uniform for a flat target, otherwise a short
/// independence Metropolis chain with uniform chord proposals.
fn draw_on_chord(
    target: &TargetDensity,
    state: &mut WalkState,
    v: &DVector<f64>,
    lo: f64,
    hi: f64,
    chord_iters: usize,
) -> (f64, f64) {
    if target.is_uniform() {
        let u = state.uniform();
        return (lo + (hi - lo) * u, 0.0);
    }
    let mut t = 0.0;
    let mut lp = state.log_pi;
    for _ in 0..chord_iters.max(1) {
        let cand = lo + (hi - lo) * state.uniform();
        let lc = target.log_density(&(state.current() + v * cand));
        if lc.is_finite() && state.accept(lc - lp) {
            t = cand;
            lp = lc;
        }
    }
    (t, lp)
}

/// Hit-and-run step along a uniformly random direction.
pub fn har_step(body: &ConvexBody, target: &TargetDensity, state: &mut WalkState, chord_iters: usize) -> Result<bool> {
    let d = body.dim();
    for _ in 0..MAX_RETRIES {
        let v = state.unit_direction(d);
        let av = body.polytope().map(|p| p.a() * &v);
        let ev = body.ellipsoid().map(|e| e.e() * &v);
        let (lo, hi) = cached_chord(body, state, &v, av.as_ref(), ev.as_ref())?;
        if hi - lo < MIN_CHORD {
            continue;
        }
        let (t, lp) = draw_on_chord(target, state, &v, lo, hi, chord_iters);
        if t == 0.0 {
            return Ok(false);
        }
        state.advance(body, &v, av.as_ref(), ev.as_ref(), t);
        if !target.is_uniform() {
            state.log_pi = lp;
        }
        return Ok(true);
    }
    Err(Error::NoConvergence(format!("{MAX_RETRIES} consecutive degenerate chords")))
}

/// Coordinate-directions hit-and-run: the chord is taken along a random axis,
/// so the cached products update with one column of `A` and of `E`.
pub fn cdhr_step(body: &ConvexBody, target: &TargetDensity, state: &mut WalkState, chord_iters: usize) -> Result<bool> {
    let d = body.dim();
    for _ in 0..MAX_RETRIES {
        let i = (state.uniform() * d as f64) as usize;
        let i = i.min(d - 1);
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        let av = body.polytope().map(|p| p.a().column(i).into_owned());
        let ev = body.ellipsoid().map(|e| e.e().column(i).into_owned());
        let (lo, hi) = cached_chord(body, state, &v, av.as_ref(), ev.as_ref())?;
        if hi - lo < MIN_CHORD {
            continue;
        }
        let (t, lp) = draw_on_chord(target, state, &v, lo, hi, chord_iters);
        if t == 0.0 {
            return Ok(false);
        }
        state.advance(body, &v, av.as_ref(), ev.as_ref(), t);
        if !target.is_uniform() {
            state.log_pi = lp;
        }
        return Ok(true);
    }
    Err(Error::NoConvergence(format!("{MAX_RETRIES} consecutive degenerate chords")))
}
