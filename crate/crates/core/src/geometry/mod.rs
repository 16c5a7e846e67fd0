//! Convex bodies and the oracles every walk consumes.

mod body;
mod embedding;
mod interior;
pub mod lp;
mod oracle;

pub use body::{BodySpec, ConvexBody, Ellipsoid, HPolytope, MEMBERSHIP_TOL};
pub use embedding::{build_embedding, embed_body, AffineEmbedding};
pub use interior::{chebyshev_ball, interior_point, ChebyshevBall};
pub use oracle::{boundary_oracle, chord, membership, normal_at, reflect, HitRecord, HitTag};

pub(crate) use body::matrix_from_rows;
pub(crate) use oracle::{chord_from_cache, pick_hit, polytope_forward, quadratic_roots};
