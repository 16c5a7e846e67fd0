//! Shared fixtures for the benchmarks.

use polywalk_core::geometry::{embed_body, ConvexBody, Ellipsoid, HPolytope};
use polywalk_core::{AffineEmbedding, DMatrix, DVector};

/// Canonical simplex over `n` assets in its `n - 1` dimensional budget coordinates.
pub fn simplex(n: usize) -> (ConvexBody, AffineEmbedding) {
    let emb = AffineEmbedding::budget(n, 1.0).expect("budget embedding");
    let body = ConvexBody::from_polytope(HPolytope::new(-DMatrix::identity(n, n), DVector::zeros(n)).expect("simplex"));
    (embed_body(&body, &emb).expect("embedded simplex"), emb)
}

pub fn cube(d: usize) -> ConvexBody {
    ConvexBody::from_polytope(HPolytope::cube(d, 1.0))
}

/// Unit cube cut by the ball of radius `0.9 sqrt(d)`.
pub fn cube_and_ball(d: usize) -> ConvexBody {
    let ball = Ellipsoid::ball(d, 0.9 * (d as f64).sqrt());
    ConvexBody::intersection(HPolytope::cube(d, 1.0), ball).expect("nonempty intersection")
}

/// Deterministic spread of asset values for the exact CDF.
pub fn values(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 37) % n) as f64 / n as f64 - 0.3).collect()
}
