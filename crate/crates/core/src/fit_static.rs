//! Penalized factorization of a single snapshot.

use ndarray::Array2;

use crate::engine;
use crate::error::{Error, Result};
use crate::factor::{random_pair, seeded_rng, FactorPair, FitConfig, FitReport};
use crate::graph::GraphSnapshot;

/// `||A - U V^T||_F^2 + lambda_s * sum_k ||V_k||_1` where `||V_k||_1` sums
/// column `k` of `V`.
pub fn objective_static(a: &GraphSnapshot, f: &FactorPair, lambda_s: f64) -> Result<f64> {
    if !(lambda_s.is_finite() && lambda_s >= 0.0) {
        return Err(Error::InvalidConfig("lambda_s must be finite and >= 0".into()));
    }
    if f.n() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "factors have {} rows for a graph on {} nodes",
            f.n(),
            a.n()
        )));
    }
    let resid = (a.weights() - &f.product()).mapv(|x| x * x).sum();
    Ok(resid + lambda_s * f.v().sum())
}

/// Fits `A ~ U V^T` with the l1 column penalty on `V`, from a seeded dense
/// positive initialization. The returned trace holds the objective after each
/// full `U`-then-`V` sweep.
pub fn fit_sparse_nmf(a: &GraphSnapshot, cfg: &FitConfig) -> Result<(FactorPair, FitReport)> {
    cfg.validate()?;
    if cfg.k > a.n() {
        return Err(Error::RankTooLarge { k: cfg.k, n: a.n() });
    }
    let mut rng = seeded_rng(cfg.seed);
    let (u, v) = random_pair(a.n(), cfg.k, &mut rng);
    fit_sparse_nmf_from(a, &FactorPair::new(u, v)?, cfg)
}

/// [`fit_sparse_nmf`] warm-started from explicit factors.
pub fn fit_sparse_nmf_from(
    a: &GraphSnapshot,
    init: &FactorPair,
    cfg: &FitConfig,
) -> Result<(FactorPair, FitReport)> {
    cfg.validate()?;
    if init.n() != a.n() || init.k() != cfg.k {
        return Err(Error::DimensionMismatch(format!(
            "initial factors are {}x{}, expected {}x{}",
            init.n(),
            init.k(),
            a.n(),
            cfg.k
        )));
    }
    let init = vec![(init.u().clone(), init.v().clone())];
    let (mut pairs, report) = engine::fit_matrices(&[a.weights()], init, cfg)?;
    let (u, v) = pairs.remove(0);
    Ok((FactorPair::new(u, v)?, report))
}

/// Unpenalized factorization: [`fit_sparse_nmf`] with `lambda_s` forced to 0
/// and the rank taken from `k`.
pub fn fit_classical_nmf(
    a: &GraphSnapshot,
    k: usize,
    cfg: &FitConfig,
) -> Result<(FactorPair, FitReport)> {
    let mut cfg = cfg.clone();
    cfg.k = k;
    cfg.lambda_s = 0.0;
    fit_sparse_nmf(a, &cfg)
}

/// Rescales each column of `U` to unit l2 norm and moves the scale onto the
/// matching column of `V`; zero columns are left alone. The product `U V^T`
/// is unchanged.
pub(crate) fn normalize_columns(u: &Array2<f64>, v: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let mut u = u.clone();
    let mut v = v.clone();
    for k in 0..u.ncols() {
        let norm = u.column(k).mapv(|x| x * x).sum().sqrt();
        if norm > 0.0 {
            u.column_mut(k).mapv_inplace(|x| x / norm);
            v.column_mut(k).mapv_inplace(|x| x * norm);
        }
    }
    (u, v)
}

/// Asserts a trace is non-increasing up to a slack of 1e-9 times its first
/// value. Shared by the static and sequence fit tests.
#[cfg(test)]
pub(crate) fn assert_monotone(trace: &[f64]) {
    let slack = 1e-9 * trace.first().copied().unwrap_or(0.0).abs().max(1e-30);
    for w in trace.windows(2) {
        assert!(
            w[1] <= w[0] + slack,
            "objective rose from {} to {} (slack {slack})",
            w[0],
            w[1]
        );
    }
}
