//! Exact results for Dirichlet-family portfolios on the simplex: Varsi's
//! volume-ratio recursion, direct samplers and closed-form moments.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// `P(<w, z> <= gamma)` for `w` uniform on the unit simplex.
pub fn varsi_cdf(z: &[f64], gamma: f64) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::Invalid("z must have at least one entry".into()));
    }
    if z.iter().any(|v| !v.is_finite()) || !gamma.is_finite() {
        return Err(Error::Invalid("z and gamma must be finite".into()));
    }
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if gamma < lo {
        return Ok(0.0);
    }
    if gamma >= hi {
        return Ok(1.0);
    }
    // Standardize to [0, 1]; the statistic's law is affine-equivariant on the simplex.
    let range = hi - lo;
    let g = (gamma - lo) / range;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for &zi in z {
        let u = (zi - lo) / range - g;
        if u >= 0.0 {
            pos.push(u);
        } else {
            neg.push(u);
        }
    }
    let mut a = vec![0.0; pos.len() + 1];
    a[0] = 1.0;
    for &un in &neg {
        for f in 1..a.len() {
            let up = pos[f - 1];
            a[f] = (up * a[f] - un * a[f - 1]) / (up - un);
        }
    }
    Ok(a[pos.len()].clamp(0.0, 1.0))
}

/// CDF of the linear statistic over a sorted grid of thresholds.
pub fn rp_linear_cdf(z: &[f64], gammas: &[f64]) -> Result<Vec<f64>> {
    if gammas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Invalid("gamma grid must be sorted ascending".into()));
    }
    let mut out = Vec::with_capacity(gammas.len());
    let mut prev = 0.0f64;
    for &g in gammas {
        // Guard the monotonicity of the curve against round-off.
        prev = prev.max(varsi_cdf(z, g)?);
        out.push(prev);
    }
    Ok(out)
}

/// Logarithm of a `Gamma(shape, 1)` variate (Marsaglia-Tsang).
///
/// Shapes below one use `Gamma(a + 1) * U^(1/a)`, kept in log space so that
/// tiny shapes do not underflow to zero.
pub fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.random::<f64>();
        let u = if u > 0.0 { u } else { f64::MIN_POSITIVE };
        return log_gamma_variate(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

/// One Dirichlet draw by normalizing Gamma variates in log space.
pub fn dirichlet_variate<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> DVector<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_variate(a, rng)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w = DVector::from_iterator(logs.len(), logs.iter().map(|l| (l - top).exp()));
    let s = w.sum();
    w /= s;
    w
}

fn check_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() || alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::Invalid("alpha must be a non-empty vector of positive numbers".into()));
    }
    Ok(())
}

/// `k` Dirichlet draws, one per row.
pub fn sample_dirichlet(alpha: &[f64], k: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(k, alpha.len());
    for i in 0..k {
        out.set_row(i, &dirichlet_variate(alpha, &mut rng).transpose());
    }
    Ok(out)
}

/// Rows `M w` with `w ~ Dirichlet(alpha)`.
pub fn sample_shadow_dirichlet(m: &DMatrix<f64>, alpha: &[f64], k: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    let n = alpha.len();
    if m.shape() != (n, n) {
        return Err(Error::Dimension(format!("M must be {n}x{n}")));
    }
    for (j, col) in m.column_iter().enumerate() {
        if col.iter().any(|v| *v < 0.0) || (col.sum() - 1.0).abs() > 1e-10 {
            return Err(Error::Invalid(format!("column {j} of M is not a probability vector")));
        }
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * n as f64 * f64::EPSILON * 16.0 {
        return Err(Error::Singular("shadow Dirichlet matrix M".into()));
    }
    Ok(sample_dirichlet(alpha, k, seed)? * m.transpose())
}

/// Left-stochastic matrix whose column `k` spreads mass evenly over rows
/// `0..=k`, so `M w` is strictly decreasing whenever `w > 0`.
pub fn monotone_m(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, k| if i <= k { 1.0 / (k + 1) as f64 } else { 0.0 })
}

/// Bootstrap portfolios `c / m` with `c ~ Multinomial(m, p)`.
pub fn sample_bootstrap_rp(n: usize, m: u64, p: &[f64], k: usize, seed: u64) -> Result<DMatrix<f64>> {
    if p.len() != n {
        return Err(Error::Dimension(format!("p has {} entries, expected {n}", p.len())));
    }
    if m == 0 {
        return Err(Error::Invalid("m must be at least 1".into()));
    }
    if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::Invalid("p must lie on the simplex".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(k, n);
    for row in 0..k {
        // Multinomial as a chain of conditional binomials.
        let mut left = m;
        let mut mass = 1.0;
        for i in 0..n {
            let c = if i + 1 == n || left == 0 {
                left
            } else {
                let q = (p[i] / mass).clamp(0.0, 1.0);
                Binomial::new(left, q).expect("valid binomial").sample(&mut rng)
            };
            out[(row, i)] = c as f64 / m as f64;
            left -= c;
            mass -= p[i];
        }
    }
    Ok(out)
}

/// Concentration `lambda` for which `Dirichlet(lambda 1)` matches the
/// covariance of uniform `Multinomial(m)/m` bootstrap portfolios over `n` assets.
pub fn bootstrap_lambda(n: usize, m: u64) -> f64 {
    (m as f64 - 1.0) / n as f64
}

/// Mean and variance of `<w, z>` under `Dirichlet(alpha)`.
pub fn dirichlet_moments(alpha: &[f64], z: &[f64]) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if z.len() != alpha.len() {
        return Err(Error::Dimension("alpha and z lengths differ".into()));
    }
    let a0: f64 = alpha.iter().sum();
    let mean = alpha.iter().zip(z).map(|(a, z)| a * z).sum::<f64>() / a0;
    // Var = (sum a_i (z_i - mean)^2) / (a0 (a0 + 1)), the covariance formula collapsed.
    let spread = alpha.iter().zip(z).map(|(a, z)| a * (z - mean).powi(2)).sum::<f64>();
    Ok((mean, spread / (a0 * (a0 + 1.0))))
}
