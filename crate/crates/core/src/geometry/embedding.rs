use nalgebra::{DMatrix, DVector};

use super::body::{ConvexBody, Ellipsoid, HPolytope};
use crate::error::{Error, Result};

/// Removes equality constraints `B x = beq` by working in coordinates of the
/// null space of `B`: `y = N (x - x0)` and `x = N^T y + x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineEmbedding {
    basis: DMatrix<f64>,
    x0: DVector<f64>,
    b_eq: DMatrix<f64>,
    beq: DVector<f64>,
    rank: usize,
}

impl AffineEmbedding {
    /// Rows of `basis` are orthonormal and span `null(B)`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.b_eq, &self.beq)
    }

    /// Number of independent equality rows.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ambient_dim(&self) -> usize {
        self.x0.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.basis * (x - &self.x0)
    }

    pub fn lift(&self, y: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(y) + &self.x0
    }

    /// Same embedding re-anchored at another affine-feasible point.
    pub fn reanchored(&self, x0: DVector<f64>) -> Result<Self> {
        build_embedding(&self.b_eq, &self.beq, &x0)
    }

    /// The budget hyperplane `sum(x) = budget` anchored at the equal-weight point.
    pub fn budget(n: usize, budget: f64) -> Result<Self> {
        build_embedding(
            &DMatrix::from_element(1, n, 1.0),
            &DVector::from_element(1, budget),
            &DVector::from_element(n, budget / n as f64),
        )
    }
}

/// Orthonormal null-space basis of `B` from its singular value decomposition.
pub fn build_embedding(b_eq: &DMatrix<f64>, beq: &DVector<f64>, x0: &DVector<f64>) -> Result<AffineEmbedding> {
    let (k, n) = b_eq.shape();
    if beq.len() != k || x0.len() != n {
        return Err(Error::Dimension(format!(
            "B is {k}x{n}, beq has {} entries, x0 has {}",
            beq.len(),
            x0.len()
        )));
    }
    let resid = b_eq * x0 - beq;
    let scale = 1.0 + beq.amax() + b_eq.amax() * x0.amax();
    if resid.amax() > 1e-10 * scale {
        return Err(Error::Infeasible(format!(
            "anchor violates the equalities by {:e}",
            resid.amax()
        )));
    }
    // Pad B to a square matrix so that the SVD returns a full right basis.
    let mut padded = DMatrix::zeros(n.max(k), n);
    padded.view_mut((0, 0), (k, n)).copy_from(b_eq);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.amax();
    let tol = smax * n.max(k) as f64 * f64::EPSILON * 16.0;
    let mut null_rows = Vec::new();
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol && smax > 0.0 {
            rank += 1;
        } else {
            null_rows.push(i);
        }
    }
    if rank < k {
        log::warn!("equality matrix has rank {rank} < {k} rows; dependent rows are ignored");
    }
    if null_rows.is_empty() {
        return Err(Error::NotFullDimensional("equalities pin down a single point".into()));
    }
    let mut basis = DMatrix::zeros(null_rows.len(), n);
    for (r, &i) in null_rows.iter().enumerate() {
        basis.set_row(r, &v_t.row(i));
    }
    Ok(AffineEmbedding { basis, x0: x0.clone(), b_eq: b_eq.clone(), beq: beq.clone(), rank })
}

/// Express a body living in the ambient space in reduced coordinates.
///
/// Facets become `A N^T y <= b - A x0`; facets whose normal vanishes on the
/// affine set are dropped when satisfied and reported as infeasible otherwise.
/// The quadric `(N^T y + x0 - c0)^T E (...) <= c` is reduced to centered form by
/// completing the square.
pub fn embed_body(body: &ConvexBody, emb: &AffineEmbedding) -> Result<ConvexBody> {
    if body.dim() != emb.ambient_dim() {
        return Err(Error::Dimension(format!(
            "body lives in R^{} but the embedding expects R^{}",
            body.dim(),
            emb.ambient_dim()
        )));
    }
    let nt = emb.basis().transpose();
    let polytope = match body.polytope() {
        None => None,
        Some(p) => {
            let a = p.a() * &nt;
            let b = p.slacks(emb.anchor());
            let mut keep = Vec::new();
            for j in 0..a.nrows() {
                let norm = a.row(j).norm();
                if norm <= 1e-12 * p.row_norms()[j] {
                    if b[j] < -1e-12 * (1.0 + p.b()[j].abs()) {
                        return Err(Error::Infeasible(format!(
                            "facet {j} is constant on the affine set and violated"
                        )));
                    }
                } else {
                    keep.push(j);
                }
            }
            if keep.is_empty() {
                None
            } else {
                let a = a.select_rows(keep.iter());
                let b = DVector::from_iterator(keep.len(), keep.iter().map(|&j| b[j]));
                Some(HPolytope::new(a, b)?)
            }
        }
    };
    let ellipsoid = match body.ellipsoid() {
        None => None,
        Some(e) => Some(embed_ellipsoid(e, emb)?),
    };
    if polytope.is_none() && ellipsoid.is_none() {
        return Err(Error::Unbounded("no constraint restricts the affine set".into()));
    }
    ConvexBody::new(polytope, ellipsoid)
}

fn embed_ellipsoid(e: &Ellipsoid, emb: &AffineEmbedding) -> Result<Ellipsoid> {
    let n = emb.basis();
    let shift = emb.anchor() - e.center();
    let reduced = n * e.e() * n.transpose();
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let g = n * (e.e() * &shift);
    let constant = shift.dot(&(e.e() * &shift));
    // q(y) = y^T R y + 2 g^T y + constant; center y_c solves R y_c = -g.
    let svd = reduced.clone().svd(true, true);
    let smax = svd.singular_values.amax();
    let y_c = svd
        .solve(&(-&g), smax * 1e-12)
        .map_err(|e| Error::Singular(format!("reduced ellipsoid: {e}")))?;
    if (&reduced * &y_c + &g).amax() > 1e-9 * (1.0 + g.amax()) {
        return Err(Error::Unbounded("quadric is a cylinder along the affine set".into()));
    }
    let level = e.c() - constant + g.dot(&(-&y_c));
    if !(level > 0.0) {
        return Err(Error::Infeasible(format!(
            "ellipsoid misses the affine set (reduced level {level:e})"
        )));
    }
    Ellipsoid::with_center(reduced, level, y_c)
}
