#![allow(dead_code)]

use polywalk_core::diagnostics::ess;
use polywalk_core::geometry::{embed_body, AffineEmbedding, ConvexBody, HPolytope};
use polywalk_core::walks::{sample, SampleSet, WalkConfig};
use polywalk_core::{DMatrix, DVector, TargetDensity};

/// Critical value of sqrt(n) D for the two-sided KS test at alpha = 0.01.
pub const KS_CRIT_01: f64 = 1.628;

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// KS test with the sample size replaced by its effective size.
pub fn ks_passes(xs: &[f64], n_eff: f64, cdf: impl Fn(f64) -> f64) -> (bool, f64) {
    let stat = ks_distance(xs, cdf) * n_eff.sqrt();
    (stat < KS_CRIT_01, stat)
}

/// Embedded canonical simplex over `n` assets.
pub fn embedded_simplex(n: usize) -> (ConvexBody, AffineEmbedding) {
    let emb = AffineEmbedding::budget(n, 1.0).unwrap();
    let simplex = ConvexBody::from_polytope(HPolytope::new(-DMatrix::identity(n, n), DVector::zeros(n)).unwrap());
    (embed_body(&simplex, &emb).unwrap(), emb)
}

/// Sample until every coordinate of `view(draws)` has at least `target_ess`
/// effective draws (summed over chains), growing the chains geometrically.
pub fn sample_until_ess(
    body: &ConvexBody,
    target: &TargetDensity,
    cfg: &WalkConfig,
    chains: usize,
    start_k: usize,
    target_ess: f64,
    view: impl Fn(&SampleSet) -> DMatrix<f64>,
) -> (SampleSet, DMatrix<f64>, f64) {
    // Keep each draw matrix to a few hundred megabytes.
    let max_rows = 40_000_000 / body.dim().max(1);
    let mut k = start_k.min(max_rows);
    loop {
        let s = sample(body, target, cfg, k, chains).unwrap();
        let v = view(&s);
        let min_ess = (0..chains)
            .map(|c| {
                let m = &s.chains[c];
                ess(&v.rows(m.start_row, m.len).into_owned()).unwrap()
            })
            .fold(DVector::zeros(v.ncols()), |acc, e| acc + e)
            .min();
        if min_ess >= target_ess || k >= max_rows {
            return (s, v, min_ess);
        }
        k = ((k as f64 * (target_ess / min_ess.max(1.0)).clamp(1.5, 50.0) * 1.2) as usize).min(max_rows);
    }
}

/// Mean and effective-size standard error of a column.
pub fn mean_se(col: &[f64], n_eff: f64) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n_eff).sqrt())
}

pub fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

/// Box with half-widths `h`, rotated by a random orthogonal `Q`: `{Q u : |u_i| <= h_i}`.
pub fn rotated_box(h: &[f64], seed: u64) -> (ConvexBody, DMatrix<f64>) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let d = h.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
    let q = g.qr().q();
    let qt = q.transpose();
    let a = DMatrix::from_fn(2 * d, d, |i, j| if i < d { qt[(i, j)] } else { -qt[(i - d, j)] });
    let b = DVector::from_fn(2 * d, |i, _| h[i % d]);
    (ConvexBody::from_polytope(HPolytope::new(a, b).unwrap()), q)
}
