//! Interior-point walks on polytopes: Dikin, Vaidya and approximate John.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, HPolytope};

use super::state::WalkState;

const JOHN_TOL: f64 = 1e-8;
const JOHN_MAX_ITERS: usize = 200;

fn polytope_only(body: &ConvexBody) -> Result<&HPolytope> {
    match (body.polytope(), body.ellipsoid()) {
        (Some(p), None) => Ok(p),
        _ => Err(Error::Config("barrier walks need a polytope-only body".into())),
    }
}

/// Rows `a_i / s_i`; `None` if some slack is not positive.
fn scaled_rows(p: &HPolytope, x: &DVector<f64>) -> Option<DMatrix<f64>> {
    let s = p.slacks(x);
    if s.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let mut rows = p.a().clone();
    for (i, mut r) in rows.row_iter_mut().enumerate() {
        r /= s[i];
    }
    Some(rows)
}

/// `sum_i w_i a_i a_i^T / s_i^2`.
fn weighted_gram(rows: &DMatrix<f64>, w: Option<&DVector<f64>>) -> DMatrix<f64> {
    match w {
        None => rows.tr_mul(rows),
        Some(w) => {
            let mut scaled = rows.clone();
            for (i, mut r) in scaled.row_iter_mut().enumerate() {
                r *= w[i];
            }
            rows.tr_mul(&scaled)
        }
    }
}

fn factor(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    m.cholesky()
        .ok_or_else(|| Error::Singular("barrier Hessian is not positive definite (degenerate polytope)".into()))
}

fn log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// `a_i^T M^{-1} a_i` for every row.
fn quad_forms(rows: &DMatrix<f64>, ch: &Cholesky<f64, Dyn>) -> DVector<f64> {
    let x = ch.solve(&rows.transpose());
    DVector::from_fn(rows.nrows(), |i, _| rows.row(i).dot(&x.column(i).transpose()))
}

/// Dikin step with the log-barrier Hessian: uniform proposal in
/// `{x : (x - p)^T H(p) (x - p) <= r^2}`, accepted with the ellipsoid volume ratio.
pub fn dikin_step(body: &ConvexBody, state: &mut WalkState, r: f64) -> Result<bool> {
    let poly = polytope_only(body)?;
    let d = body.dim();
    let p = state.current().clone();
    let hp = current_metric(poly, state, &p, &|rows, _| Ok(weighted_gram(rows, None)))?;
    let u = state.in_unit_ball(d);
    let step = hp.l_dirty().tr_solve_lower_triangular(&u).expect("triangular factor") * r;
    let y = &p + &step;
    let hy = scaled_rows(poly, &y).and_then(|rows_y| weighted_gram(&rows_y, None).cholesky());
    // The reverse move must be possible: p has to lie in E_y(r).
    let Some(hy) = hy.filter(|hy| (hy.l().transpose() * &step).norm_squared() <= r * r) else {
        state.metric = Some((p, hp));
        return Ok(false);
    };
    if !state.accept(0.5 * (log_det(&hy) - log_det(&hp))) {
        state.metric = Some((p, hp));
        return Ok(false);
    }
    state.jump(body, y.clone(), 0.0);
    state.metric = Some((y, hy));
    Ok(true)
}

/// Factored metric at the current point, reusing the cached one when it belongs to `p`.
fn current_metric(
    poly: &HPolytope,
    state: &mut WalkState,
    p: &DVector<f64>,
    metric: &Metric<'_>,
) -> Result<Cholesky<f64, Dyn>> {
    if let Some((q, ch)) = state.metric.take() {
        if &q == p {
            return Ok(ch);
        }
    }
    let rows = scaled_rows(poly, p).ok_or(Error::DegenerateStart { slack: 0.0 })?;
    factor(metric(&rows, state)?)
}

/// Local metric built from the slack-scaled rows.
type Metric<'a> = dyn Fn(&DMatrix<f64>, &mut WalkState) -> Result<DMatrix<f64>> + 'a;

/// Lazy Metropolis step with the Gaussian proposal `N(p, M(p)^{-1} / c)`, `c = precision_scale`.
fn gaussian_step(
    body: &ConvexBody,
    state: &mut WalkState,
    lazy: bool,
    precision_scale: f64,
    metric: &Metric<'_>,
) -> Result<bool> {
    if lazy && state.uniform() < 0.5 {
        return Ok(false);
    }
    let poly = polytope_only(body)?;
    let d = body.dim();
    let p = state.current().clone();
    let mp = current_metric(poly, state, &p, metric)?;
    let xi = state.normal_vector(d);
    let step = mp.l_dirty().tr_solve_lower_triangular(&xi).expect("triangular factor") / precision_scale.sqrt();
    let y = &p + &step;
    let my = scaled_rows(poly, &y).and_then(|rows_y| metric(&rows_y, state).and_then(factor).ok());
    let Some(my) = my else {
        state.metric = Some((p, mp));
        return Ok(false);
    };
    let q_fwd = (mp.l().transpose() * &step).norm_squared();
    let q_back = (my.l().transpose() * &step).norm_squared();
    // log g_y(p) - log g_p(y)
    let log_alpha = 0.5 * (log_det(&my) - log_det(&mp)) - 0.5 * precision_scale * (q_back - q_fwd);
    if !state.accept(log_alpha) {
        state.metric = Some((p, mp));
        return Ok(false);
    }
    state.jump(body, y.clone(), 0.0);
    state.metric = Some((y, my));
    Ok(true)
}

/// Vaidya step: metric `sum (sigma_i + d/m) a_i a_i^T / s_i^2` with leverage
/// scores `sigma`, proposal covariance `r^2 / sqrt(m d) V^{-1}`.
pub fn vaidya_step(body: &ConvexBody, state: &mut WalkState, r: f64, lazy: bool) -> Result<bool> {
    let poly = polytope_only(body)?;
    let (m, d) = (poly.num_facets() as f64, body.dim() as f64);
    let metric = |rows: &DMatrix<f64>, _: &mut WalkState| -> Result<DMatrix<f64>> {
        let h = factor(weighted_gram(rows, None))?;
        let w = quad_forms(rows, &h).add_scalar(d / m);
        Ok(weighted_gram(rows, Some(&w)))
    };
    gaussian_step(body, state, lazy, (m * d).sqrt() / (r * r), &metric)
}

/// Approximate John weights: fixed point of `w = sigma(w) + beta` where
/// `sigma_i(w) = w_i^a a_i^T (sum_j w_j^a a_j a_j^T)^{-1} a_i` on the scaled rows.
pub fn john_weights(rows: &DMatrix<f64>, warm: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let (m, d) = rows.shape();
    let beta = d as f64 / (2.0 * m as f64);
    let a = (1.0 - 1.0 / (1.0 / beta).log2()).max(0.0);
    let mut w = match warm {
        Some(w) if w.len() == m => w.clone(),
        _ => DVector::from_element(m, 1.5 * d as f64 / m as f64),
    };
    let mut trace = Vec::new();
    for _ in 0..JOHN_MAX_ITERS {
        let wa = w.map(|v| v.powf(a));
        let ch = factor(weighted_gram(rows, Some(&wa)))?;
        let sigma = quad_forms(rows, &ch).component_mul(&wa);
        let next = sigma.add_scalar(beta);
        let change = (&next - &w).amax();
        w = next;
        trace.push(change);
        if change < JOHN_TOL {
            return Ok(w);
        }
    }
    let tail: Vec<String> = trace.iter().rev().take(5).map(|c| format!("{c:.3e}")).collect();
    Err(Error::NoConvergence(format!(
        "John weights after {JOHN_MAX_ITERS} iterations; last changes [{}]",
        tail.join(", ")
    )))
}

/// John step: metric `sum zeta_i a_i a_i^T / s_i^2`, proposal `N(p, r^2 / d^{3/2} J^{-1})`.
pub fn john_step(body: &ConvexBody, state: &mut WalkState, r: f64, lazy: bool) -> Result<bool> {
    let d = body.dim() as f64;
    let metric = |rows: &DMatrix<f64>, st: &mut WalkState| -> Result<DMatrix<f64>> {
        let w = john_weights(rows, st.john_weights.as_ref())?;
        let j = weighted_gram(rows, Some(&w));
        st.john_weights = Some(w);
        Ok(j)
    };
    gaussian_step(body, state, lazy, d.powf(1.5) / (r * r), &metric)
}

/// Leverage scores at `x`, for inspection.
pub fn leverage_scores(p: &HPolytope, x: &DVector<f64>) -> Result<DVector<f64>> {
    let rows = scaled_rows(p, x).ok_or(Error::DegenerateStart { slack: 0.0 })?;
    let h = factor(weighted_gram(&rows, None))?;
    Ok(quad_forms(&rows, &h))
}

/// Approximate John weights at `x`, for inspection.
pub fn john_weights_at(p: &HPolytope, x: &DVector<f64>) -> Result<DVector<f64>> {
    let rows = scaled_rows(p, x).ok_or(Error::DegenerateStart { slack: 0.0 })?;
    john_weights(&rows, None)
}

/// Log-barrier Hessian at `x`.
pub fn barrier_hessian(p: &HPolytope, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let rows = scaled_rows(p, x).ok_or(Error::DegenerateStart { slack: 0.0 })?;
    Ok(weighted_gram(&rows, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::TargetDensity;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_hessian_is_isotropic() {
        let h = barrier_hessian(&HPolytope::cube(3, 2.0), &DVector::zeros(3)).unwrap();
        // Two facets per axis at distance 2: 2 / 4 on the diagonal.
        assert!((h - DMatrix::identity(3, 3) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn cube_scores_are_uniform() {
        let p = HPolytope::cube(4, 1.0);
        let s = leverage_scores(&p, &DVector::zeros(4)).unwrap();
        assert!(s.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let w = john_weights_at(&p, &DVector::zeros(4)).unwrap();
        assert!(w.iter().all(|v| (v - w[0]).abs() < 1e-9));
        // Scores sum to d, weights to d + m beta = 1.5 d.
        assert!((w.sum() - 6.0).abs() < 1e-6);
    }

    #[test]
    fn john_weights_off_center() {
        let p = HPolytope::corner_simplex(3);
        let w = john_weights_at(&p, &dvector![0.1, 0.2, 0.3]).unwrap();
        assert!(w.iter().all(|v| *v > 0.0));
        assert!((w.sum() - 1.5 * 3.0).abs() < 1e-6);
    }

    #[test]
    fn barrier_walks_stay_inside() {
        let body = ConvexBody::from_polytope(HPolytope::corner_simplex(3));
        let start = dvector![0.2, 0.2, 0.2];
        let mut s = WalkState::new(&body, &TargetDensity::Uniform, start, ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut moved = 0;
        for i in 0..600 {
            moved += match i % 3 {
                0 => dikin_step(&body, &mut s, 0.5),
                1 => vaidya_step(&body, &mut s, 0.5, true),
                _ => john_step(&body, &mut s, 0.5, true),
            }
            .unwrap() as usize;
            assert!(body.min_slack(s.current()) > 0.0);
        }
        assert!(moved > 100, "{moved}");
    }

    #[test]
    fn ellipsoid_is_rejected() {
        let body = ConvexBody::from_ellipsoid(crate::geometry::Ellipsoid::ball(2, 1.0));
        let mut s = WalkState::new(&body, &TargetDensity::Uniform, DVector::zeros(2), ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert!(matches!(dikin_step(&body, &mut s, 0.5), Err(Error::Config(_))));
    }
}
