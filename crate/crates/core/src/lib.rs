//! Random portfolios over convex bodies.
//!
//! The crate samples portfolio weights from polytopes, ellipsoids and their
//! intersections with geometric random walks, evaluates exact results for
//! Dirichlet-family portfolios on the simplex, and runs a rebalanced
//! backtest relating portfolio factor scores to out-of-sample performance.

pub mod backtest;
pub mod densities;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod portfolio;
pub mod rounding;
pub mod serde_mat;
pub mod walks;

pub use densities::TargetDensity;
pub use error::{Error, Result};
pub use geometry::{AffineEmbedding, ConvexBody, Ellipsoid, HPolytope};
pub use walks::{SampleSet, WalkConfig, WalkKind};

pub use nalgebra::{DMatrix, DVector};

/// Version tag written into every machine-readable output.
pub const SCHEMA_VERSION: u32 = 1;
