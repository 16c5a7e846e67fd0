use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance for membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Half-space representation `{x : A x <= b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    row_norms: DVector<f64>,
}

impl HPolytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() == 0 {
            return Err(Error::Invalid("polytope needs at least one facet".into()));
        }
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("polytope entries must be finite".into()));
        }
        let row_norms = DVector::from_iterator(a.nrows(), a.row_iter().map(|r| r.norm()));
        if let Some(j) = row_norms.iter().position(|&n| n == 0.0) {
            return Err(Error::Invalid(format!("facet {j} has a zero normal")));
        }
        Ok(Self { a, b, row_norms })
    }

    /// The box `[-half_width, half_width]^dim`.
    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self::boxed(&vec![-half_width; dim], &vec![half_width; dim])
    }

    /// Axis-aligned box with the given corners.
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Self {
        let d = lower.len();
        let mut a = DMatrix::zeros(2 * d, d);
        let mut b = DVector::zeros(2 * d);
        for i in 0..d {
            a[(i, i)] = 1.0;
            b[i] = upper[i];
            a[(d + i, i)] = -1.0;
            b[d + i] = -lower[i];
        }
        Self::new(a, b).expect("box is well formed")
    }

    /// `{x >= 0, sum(x) <= 1}` in `dim` dimensions.
    pub fn corner_simplex(dim: usize) -> Self {
        let mut a = DMatrix::zeros(dim + 1, dim);
        let mut b = DVector::zeros(dim + 1);
        for i in 0..dim {
            a[(i, i)] = -1.0;
            a[(dim, i)] = 1.0;
        }
        b[dim] = 1.0;
        Self::new(a, b).expect("simplex is well formed")
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn row_norms(&self) -> &DVector<f64> {
        &self.row_norms
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_facets(&self) -> usize {
        self.a.nrows()
    }

    /// `b - A x`.
    pub fn slacks(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.a * x
    }
}

/// `{x : (x - center)^T E (x - center) <= c}`.
///
/// Bodies read from files carry no center; the center appears when an
/// off-center quadric is reduced to completed-square form by an embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    e: DMatrix<f64>,
    c: f64,
    center: DVector<f64>,
}

impl Ellipsoid {
    pub fn new(e: DMatrix<f64>, c: f64) -> Result<Self> {
        let n = e.nrows();
        Self::with_center(e, c, DVector::zeros(n))
    }

    pub fn with_center(e: DMatrix<f64>, c: f64, center: DVector<f64>) -> Result<Self> {
        if !e.is_square() || e.nrows() != center.len() {
            return Err(Error::Dimension(format!(
                "ellipsoid matrix is {}x{} with center of length {}",
                e.nrows(),
                e.ncols(),
                center.len()
            )));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Invalid(format!("ellipsoid level must be positive, got {c}")));
        }
        if e.iter().chain(center.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("ellipsoid entries must be finite".into()));
        }
        let scale = e.amax().max(1.0);
        for i in 0..e.nrows() {
            for j in 0..i {
                if (e[(i, j)] - e[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::Invalid("ellipsoid matrix is not symmetric".into()));
                }
            }
        }
        let min_eig = e.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(Error::Invalid(format!(
                "ellipsoid matrix is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        // Symmetrize exactly so that quadratic forms are bit-for-bit symmetric.
        let e = (&e + e.transpose()) * 0.5;
        Ok(Self { e, c, center })
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        Self::new(DMatrix::identity(dim, dim), radius * radius).expect("ball is well formed")
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    /// `(x - center)^T E (x - center)`.
    pub fn quad(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.center;
        d.dot(&(&self.e * &d))
    }
}

/// A polytope, an ellipsoid, or their intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    polytope: Option<HPolytope>,
    ellipsoid: Option<Ellipsoid>,
    interior: Option<DVector<f64>>,
}

impl ConvexBody {
    pub fn new(polytope: Option<HPolytope>, ellipsoid: Option<Ellipsoid>) -> Result<Self> {
        match (&polytope, &ellipsoid) {
            (None, None) => Err(Error::Invalid("a body needs a polytope or an ellipsoid".into())),
            (Some(p), Some(e)) if p.dim() != e.dim() => Err(Error::Dimension(format!(
                "polytope lives in R^{} but ellipsoid in R^{}",
                p.dim(),
                e.dim()
            ))),
            _ => Ok(Self { polytope, ellipsoid, interior: None }),
        }
    }

    pub fn from_polytope(p: HPolytope) -> Self {
        Self { polytope: Some(p), ellipsoid: None, interior: None }
    }

    pub fn from_ellipsoid(e: Ellipsoid) -> Self {
        Self { polytope: None, ellipsoid: Some(e), interior: None }
    }

    pub fn intersection(p: HPolytope, e: Ellipsoid) -> Result<Self> {
        Self::new(Some(p), Some(e))
    }

    pub fn polytope(&self) -> Option<&HPolytope> {
        self.polytope.as_ref()
    }

    pub fn ellipsoid(&self) -> Option<&Ellipsoid> {
        self.ellipsoid.as_ref()
    }

    pub fn dim(&self) -> usize {
        match (&self.polytope, &self.ellipsoid) {
            (Some(p), _) => p.dim(),
            (None, Some(e)) => e.dim(),
            (None, None) => unreachable!("constructor rejects empty bodies"),
        }
    }

    /// Interior point certifying non-emptiness, if one has been computed.
    pub fn certified_interior(&self) -> Option<&DVector<f64>> {
        self.interior.as_ref()
    }

    /// Compute and store a strictly interior point.
    pub fn certify(mut self) -> Result<Self> {
        let p = super::interior::interior_point(&self)?;
        self.interior = Some(p);
        Ok(self)
    }

    /// Smallest normalized slack over all constraints; positive iff strictly inside.
    pub fn min_slack(&self, x: &DVector<f64>) -> f64 {
        let mut s = f64::INFINITY;
        if let Some(p) = &self.polytope {
            let sl = p.slacks(x);
            for j in 0..sl.len() {
                s = s.min(sl[j] / p.row_norms[j]);
            }
        }
        if let Some(e) = &self.ellipsoid {
            s = s.min((e.c - e.quad(x)) / e.c);
        }
        s
    }
}

/// JSON body description: `{"A", "b", "Aeq", "beq", "E", "c"}`, absent keys mean absent parts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BodySpec {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(rename = "Aeq", default, skip_serializing_if = "Option::is_none")]
    pub a_eq: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beq: Option<Vec<f64>>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

pub(crate) fn rows_from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl BodySpec {
    /// Body in the ambient space plus the equality constraints, if any.
    pub fn parts(&self) -> Result<(ConvexBody, Option<(DMatrix<f64>, DVector<f64>)>)> {
        let polytope = match (&self.a, &self.b) {
            (Some(a), Some(b)) => Some(HPolytope::new(matrix_from_rows(a)?, DVector::from_vec(b.clone()))?),
            (None, None) => None,
            _ => return Err(Error::Invalid("\"A\" and \"b\" must appear together".into())),
        };
        let ellipsoid = match (&self.e, self.c) {
            (Some(e), Some(c)) => Some(Ellipsoid::new(matrix_from_rows(e)?, c)?),
            (None, None) => None,
            _ => return Err(Error::Invalid("\"E\" and \"c\" must appear together".into())),
        };
        let body = ConvexBody::new(polytope, ellipsoid)?;
        let eq = match (&self.a_eq, &self.beq) {
            (Some(a), Some(b)) => {
                let a = matrix_from_rows(a)?;
                if a.ncols() != body.dim() || a.nrows() != b.len() {
                    return Err(Error::Dimension("equality block does not match the body".into()));
                }
                Some((a, DVector::from_vec(b.clone())))
            }
            (None, None) => None,
            _ => return Err(Error::Invalid("\"Aeq\" and \"beq\" must appear together".into())),
        };
        Ok((body, eq))
    }

    /// Full-dimensional body for sampling, with the embedding that lifts its
    /// points back when equalities are present. The embedding is anchored at
    /// the least-squares solution of the equalities.
    pub fn reduced(&self) -> Result<(ConvexBody, Option<super::AffineEmbedding>)> {
        let (body, eq) = self.parts()?;
        match eq {
            None => Ok((body.certify()?, None)),
            Some((a, b)) => {
                let x0 = a
                    .clone()
                    .svd(true, true)
                    .solve(&b, 1e-12)
                    .map_err(|e| Error::Singular(format!("equality system: {e}")))?;
                let emb = super::build_embedding(&a, &b, &x0)?;
                Ok((super::embed_body(&body, &emb)?.certify()?, Some(emb)))
            }
        }
    }

    /// Fails for ellipsoids with a nonzero center, which the file format cannot express.
    pub fn from_body(body: &ConvexBody) -> Result<Self> {
        let mut spec = Self::default();
        if let Some(p) = body.polytope() {
            spec.a = Some(rows_from_matrix(p.a()));
            spec.b = Some(p.b().iter().copied().collect());
        }
        if let Some(e) = body.ellipsoid() {
            if e.center().amax() != 0.0 {
                return Err(Error::Invalid("off-center ellipsoids have no file representation".into()));
            }
            spec.e = Some(rows_from_matrix(e.e()));
            spec.c = Some(e.c());
        }
        Ok(spec)
    }
}
