use polywalk_core::diagnostics::ess;
use polywalk_core::geometry::{embed_body, AffineEmbedding, ConvexBody, HPolytope};
use polywalk_core::walks::{sample, SampleSet, WalkConfig};
use polywalk_core::{DMatrix, DVector, TargetDensity};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Critical value of sqrt(n) D for the two-sided KS test at alpha = 0.01.
pub const KS_CRIT_01: f64 = 1.628;

pub fn ks_stat(xs: &[f64], n_eff: f64, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d * n_eff.sqrt()
}

pub fn embedded_simplex(n: usize) -> (ConvexBody, AffineEmbedding) {
    let emb = AffineEmbedding::budget(n, 1.0).unwrap();
    let simplex = ConvexBody::from_polytope(HPolytope::new(-DMatrix::identity(n, n), DVector::zeros(n)).unwrap());
    (embed_body(&simplex, &emb).unwrap(), emb)
}

/// Summed per-chain ESS of each column of `view`.
pub fn view_ess(s: &SampleSet, v: &DMatrix<f64>) -> DVector<f64> {
    s.chains
        .iter()
        .map(|m| ess(&v.rows(m.start_row, m.len).into_owned()).unwrap())
        .fold(DVector::zeros(v.ncols()), |acc, e| acc + e)
}

/// Grow the chains until every column of `view(draws)` reaches `target_ess`.
/// Returns the view and its smallest ESS.
pub fn sample_until_ess(
    body: &ConvexBody,
    target: &TargetDensity,
    cfg: &WalkConfig,
    chains: usize,
    start_k: usize,
    target_ess: f64,
    view: impl Fn(&SampleSet) -> DMatrix<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    // Keep each draw matrix to a few hundred megabytes.
    let max_rows = 40_000_000 / body.dim().max(1);
    let mut k = start_k.min(max_rows);
    loop {
        let s = sample(body, target, cfg, k, chains).unwrap();
        let v = view(&s);
        let e = view_ess(&s, &v);
        let min_ess = e.min();
        if min_ess >= target_ess || k >= max_rows {
            return (v, e);
        }
        k = ((k as f64 * (target_ess / min_ess.max(1.0)).clamp(1.5, 50.0) * 1.2) as usize).min(max_rows);
    }
}

/// Mean and standard error using an effective sample size.
pub fn mean_se(col: &[f64], n_eff: f64) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n_eff).sqrt())
}

pub fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

/// `{Q u : |u_i| <= h_i}` for a random orthogonal `Q`.
pub fn rotated_box(h: &[f64], seed: u64) -> (ConvexBody, DMatrix<f64>) {
    let d = h.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
    let q = g.qr().q();
    let qt = q.transpose();
    let a = DMatrix::from_fn(2 * d, d, |i, j| if i < d { qt[(i, j)] } else { -qt[(i - d, j)] });
    let b = DVector::from_fn(2 * d, |i, _| h[i % d]);
    (ConvexBody::from_polytope(HPolytope::new(a, b).unwrap()), q)
}
