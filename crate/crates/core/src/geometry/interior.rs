use nalgebra::{DMatrix, DVector};

use super::body::{ConvexBody, Ellipsoid, HPolytope};
use super::lp::{self, LpOutcome};
use crate::error::{Error, Result};

/// Largest inscribed ball of a polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevBall {
    pub center: DVector<f64>,
    pub radius: f64,
    /// False when the radius is zero, i.e. the polytope has no interior.
    pub full_dimensional: bool,
}

/// Solve `max r` s.t. `a_i^T x + r ||a_i|| <= b_i` with the simplex method.
pub fn chebyshev_ball(p: &HPolytope) -> Result<ChebyshevBall> {
    let (m, n) = (p.num_facets(), p.dim());
    let mut a = DMatrix::zeros(m, n + 1);
    a.view_mut((0, 0), (m, n)).copy_from(p.a());
    a.set_column(n, p.row_norms());
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let mut free = vec![true; n + 1];
    free[n] = false;
    match lp::maximize(&c, &a, p.b(), &free) {
        LpOutcome::Infeasible => Err(Error::Infeasible("polytope has no feasible point".into())),
        LpOutcome::Unbounded => Err(Error::Unbounded("polytope contains balls of any radius".into())),
        LpOutcome::Optimal { x, .. } => {
            let center = x.rows(0, n).into_owned();
            // Report the radius actually certified by the center.
            let slack = p.slacks(&center);
            let radius = (0..m).map(|j| slack[j] / p.row_norms()[j]).fold(f64::INFINITY, f64::min);
            let scale = 1.0 + p.b().amax();
            let full_dimensional = radius > 1e-12 * scale;
            Ok(ChebyshevBall { center, radius: radius.max(0.0), full_dimensional })
        }
    }
}

/// Strictly interior point of the body.
pub fn interior_point(body: &ConvexBody) -> Result<DVector<f64>> {
    let point = match (body.polytope(), body.ellipsoid()) {
        (Some(p), None) => {
            let ball = chebyshev_ball(p)?;
            if !ball.full_dimensional {
                return Err(Error::NotFullDimensional(format!(
                    "Chebyshev radius {:e} at the best center",
                    ball.radius
                )));
            }
            ball.center
        }
        (None, Some(e)) => e.center().clone(),
        (Some(p), Some(e)) => polytope_ellipsoid_center(p, e)?,
        (None, None) => unreachable!("constructor rejects empty bodies"),
    };
    let slack = body.min_slack(&point);
    if !(slack > 0.0) {
        return Err(Error::Infeasible(format!("computed center has min slack {slack:e}")));
    }
    Ok(point)
}

/// Affine map `x = center + T z` sending the unit ball onto the ellipsoid.
pub(crate) fn ellipsoid_frame(e: &Ellipsoid) -> Result<DMatrix<f64>> {
    let eig = e.e().clone().symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-14 * lmax.max(f64::MIN_POSITIVE))) {
        return Err(Error::Singular("ellipsoid matrix is not positive definite".into()));
    }
    let scale = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| (e.c() / l).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&scale))
}

fn polytope_ellipsoid_center(p: &HPolytope, e: &Ellipsoid) -> Result<DVector<f64>> {
    let t = ellipsoid_frame(e)?;
    let a = p.a() * &t;
    let b = p.b() - p.a() * e.center();
    let (z, r) = lp::ball_chebyshev(&a, &b);
    if !(r > 0.0) {
        // The relaxed optimum measures how far the parts are from overlapping.
        return Err(Error::Infeasible(format!(
            "polytope and ellipsoid share no interior (best inscribed radius {r:.3e} in the ellipsoid frame)"
        )));
    }
    Ok(e.center() + t * z)
}
