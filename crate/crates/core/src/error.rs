use thiserror::Error;

/// Errors raised by the sampling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("ray is unbounded: no boundary crossing along the direction")]
    UnboundedRay,

    #[error("start point lies on or outside the boundary (min slack {slack:e})")]
    DegenerateStart { slack: f64 },

    #[error("boundary normal vanishes at the hit point")]
    DegenerateBoundary,

    #[error("body is empty: {0}")]
    Infeasible(String),

    #[error("body is unbounded: {0}")]
    Unbounded(String),

    #[error("body is not full-dimensional: {0}")]
    NotFullDimensional(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("constraint specification is infeasible; relaxing any of [{}] restores feasibility", binding.join(", "))]
    InfeasibleSpec { binding: Vec<String> },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
