//! Target log-densities (up to an additive constant) and their gradients.
//!
//! Everything stays in log space. Points outside the support evaluate to
//! `-inf`, which walks treat as a rejection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{matrix_from_rows, AffineEmbedding};

#[derive(Debug, Clone, PartialEq)]
pub enum TargetDensity {
    Uniform,
    Dirichlet {
        alpha: DVector<f64>,
    },
    /// Push-forward of `Dirichlet(alpha)` through a left-stochastic `M`.
    ShadowDirichlet {
        m: DMatrix<f64>,
        m_inv: DMatrix<f64>,
        alpha: DVector<f64>,
    },
    /// `base` evaluated at `x = linear * y + offset`.
    Transformed {
        base: Box<TargetDensity>,
        linear: DMatrix<f64>,
        offset: DVector<f64>,
    },
}

fn check_alpha(alpha: &DVector<f64>) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::Invalid("alpha must not be empty".into()));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::Invalid(format!("alpha entries must be positive, found {a}")));
    }
    Ok(())
}

impl TargetDensity {
    pub fn dirichlet(alpha: DVector<f64>) -> Result<Self> {
        check_alpha(&alpha)?;
        if alpha.iter().any(|&a| a < 1.0) {
            log::debug!("alpha below one: the density is unbounded near the facets");
        }
        Ok(Self::Dirichlet { alpha })
    }

    pub fn shadow_dirichlet(m: DMatrix<f64>, alpha: DVector<f64>) -> Result<Self> {
        check_alpha(&alpha)?;
        if !m.is_square() || m.nrows() != alpha.len() {
            return Err(Error::Dimension("M must be n x n with n = len(alpha)".into()));
        }
        for (j, col) in m.column_iter().enumerate() {
            if (col.sum() - 1.0).abs() > 1e-10 {
                return Err(Error::Invalid(format!("column {j} of M sums to {}", col.sum())));
            }
        }
        let m_inv = m
            .clone()
            .try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singular("shadow Dirichlet matrix M".into()))?;
        Ok(Self::ShadowDirichlet { m, m_inv, alpha })
    }

    /// Pull a density on the ambient space back to embedded coordinates.
    pub fn transformed(base: TargetDensity, emb: &AffineEmbedding) -> Result<Self> {
        Self::pullback(base, emb.basis().transpose(), emb.anchor().clone())
    }

    /// `base` composed with the affine map `y -> linear * y + offset`.
    pub fn pullback(base: TargetDensity, linear: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if linear.nrows() != offset.len() {
            return Err(Error::Dimension("affine map rows and offset disagree".into()));
        }
        if let Some(n) = base.dim() {
            if n != linear.nrows() {
                return Err(Error::Dimension(format!(
                    "density lives in R^{n} but the map lands in R^{}",
                    linear.nrows()
                )));
            }
        }
        match base {
            Self::Uniform => Ok(Self::Uniform),
            // Collapse nested pullbacks into one affine map.
            Self::Transformed { base, linear: inner, offset: inner_off } => Ok(Self::Transformed {
                base,
                offset: &inner * offset + inner_off,
                linear: inner * linear,
            }),
            base => Ok(Self::Transformed { base: Box::new(base), linear, offset }),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Self::Uniform)
    }

    /// Dimension of the space the density is evaluated on, if fixed.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Uniform => None,
            Self::Dirichlet { alpha } | Self::ShadowDirichlet { alpha, .. } => Some(alpha.len()),
            Self::Transformed { linear, .. } => Some(linear.ncols()),
        }
    }

    /// Log-density up to a constant; `-inf` outside the support.
    pub fn log_density(&self, y: &DVector<f64>) -> f64 {
        match self {
            Self::Uniform => 0.0,
            Self::Dirichlet { alpha } => dirichlet_log_kernel(alpha, y),
            Self::ShadowDirichlet { m_inv, alpha, .. } => dirichlet_log_kernel(alpha, &(m_inv * y)),
            Self::Transformed { base, linear, offset } => base.log_density(&(linear * y + offset)),
        }
    }

    pub fn grad_log_density(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Self::Uniform => Ok(DVector::zeros(y.len())),
            Self::Dirichlet { alpha } => dirichlet_log_grad(alpha, y),
            Self::ShadowDirichlet { m_inv, alpha, .. } => {
                let g = dirichlet_log_grad(alpha, &(m_inv * y))?;
                Ok(m_inv.tr_mul(&g))
            }
            Self::Transformed { base, linear, offset } => {
                let g = base.grad_log_density(&(linear * y + offset))?;
                Ok(linear.tr_mul(&g))
            }
        }
    }
}

fn dirichlet_log_kernel(alpha: &DVector<f64>, x: &DVector<f64>) -> f64 {
    if x.len() != alpha.len() {
        return f64::NEG_INFINITY;
    }
    let mut s = 0.0;
    for (a, xi) in alpha.iter().zip(x.iter()) {
        if !(*xi > 0.0) {
            return f64::NEG_INFINITY;
        }
        if *a != 1.0 {
            s += (a - 1.0) * xi.ln();
        }
    }
    s
}

fn dirichlet_log_grad(alpha: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != alpha.len() {
        return Err(Error::Dimension(format!("expected {} coordinates, got {}", alpha.len(), x.len())));
    }
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Invalid("gradient requested outside the Dirichlet support".into()));
    }
    Ok(DVector::from_fn(x.len(), |i, _| (alpha[i] - 1.0) / x[i]))
}

/// JSON density description, e.g. `{"kind": "dirichlet", "alpha": [...], "alpha_scale": 0.1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    #[serde(alias = "flat")]
    Uniform,
    Dirichlet {
        alpha: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_scale: Option<f64>,
    },
    ShadowDirichlet {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
        alpha: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_scale: Option<f64>,
    },
}

impl DensitySpec {
    pub fn build(&self) -> Result<TargetDensity> {
        let scaled = |alpha: &[f64], scale: Option<f64>| -> DVector<f64> {
            DVector::from_iterator(alpha.len(), alpha.iter().map(|a| a * scale.unwrap_or(1.0)))
        };
        match self {
            Self::Uniform => Ok(TargetDensity::Uniform),
            Self::Dirichlet { alpha, alpha_scale } => TargetDensity::dirichlet(scaled(alpha, *alpha_scale)),
            Self::ShadowDirichlet { m, alpha, alpha_scale } => {
                TargetDensity::shadow_dirichlet(matrix_from_rows(m)?, scaled(alpha, *alpha_scale))
            }
        }
    }
}
