//! Shared multiplicative-update engine.
//!
//! One outer iteration sweeps the snapshots in order; at each snapshot the
//! row factor is updated first, then the column factor, and later snapshots
//! immediately see the fresh values of earlier ones. Each factor update is an
//! exact minimizer of the standard diagonal majorizer of the objective's
//! dependence on that factor, so the recorded objective cannot increase
//! (the `eps` denominator guard only shortens the step); the update rules are:
//!
//! ```text
//! U_t <- U_t .* (A_t V_t + 2 l_t sum_{s in N(t)} U_s) ./ (U_t V_t'V_t + 2 m(t) l_t U_t + eps)
//! V_t <- V_t .* (A_t' U_t)                            ./ (V_t U_t'U_t + l_s/2 + eps)
//! ```
//!
//! where `N(t)` is the window neighborhood truncated to the sequence and
//! `m(t)` its size. The coefficients `2 l_t` and `l_s/2` are the exact
//! gradient weights of the fitted objective: the window penalty touches each
//! unordered pair from both sides of its double sum, and the l1 term is
//! linear rather than quadratic.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::factor::{FitConfig, FitReport};
use crate::sparse::{residual_sq, Csr};

/// In-range window neighbors of `t` (excluding `t` itself).
pub(crate) fn window_neighbors(t: usize, t_len: usize, window: usize) -> std::ops::RangeInclusive<usize> {
    let half = window / 2;
    t.saturating_sub(half)..=(t + half).min(t_len - 1)
}

/// `x <- x .* num ./ (x * gram + ridge * x + shift + eps)`, elementwise.
fn multiplicative_step(
    x: &mut Array2<f64>,
    num: &Array2<f64>,
    gram: &Array2<f64>,
    ridge: f64,
    shift: f64,
    eps: f64,
) {
    let xg = x.dot(gram);
    ndarray::Zip::from(x).and(num).and(&xg).for_each(|xi, &n, &d| {
        *xi *= n / (d + ridge * *xi + shift + eps);
    });
}

/// Window-penalty sum as it appears in the objective: every ordered pair
/// `(t, s)` with `s` in the truncated neighborhood of `t` contributes, so
/// unordered pairs are counted from both sides.
pub(crate) fn window_penalty_sum(us: &[Array2<f64>], window: usize) -> f64 {
    let t_len = us.len();
    let mut total = 0.0;
    for t in 0..t_len {
        for s in window_neighbors(t, t_len, window) {
            if s == t {
                continue;
            }
            total += (&us[t] - &us[s]).mapv(|d| d * d).sum();
        }
    }
    total
}

/// Objective over raw matrices: fit + window penalty + l1 penalty.
pub(crate) fn objective_matrices(
    ctxs: &[SnapshotCtx],
    us: &[Array2<f64>],
    vs: &[Array2<f64>],
    lambda_t: f64,
    lambda_s: f64,
    window: usize,
) -> f64 {
    let mut resid = 0.0;
    for (t, ctx) in ctxs.iter().enumerate() {
        let utu = us[t].t().dot(&us[t]);
        let vtv = vs[t].t().dot(&vs[t]);
        resid += residual_sq(&ctx.rows, &us[t], &vs[t], &utu, &vtv);
    }
    let mut obj = resid;
    if lambda_t > 0.0 {
        obj += lambda_t * window_penalty_sum(us, window);
    }
    let sparsity: f64 = vs.iter().map(|v| v.sum()).sum();
    obj + lambda_s * sparsity
}

/// Row-compressed copies of one data matrix and its transpose.
pub(crate) struct SnapshotCtx {
    pub(crate) rows: Csr,
    pub(crate) cols: Csr,
}

impl SnapshotCtx {
    pub(crate) fn new(a: &Array2<f64>) -> Self {
        Self {
            rows: Csr::from_dense(a),
            cols: Csr::transpose_from_dense(a),
        }
    }
}

/// Fits `mats[t] ~ U_t V_t^T` from the given initial factors. `mats` may be
/// rectangular; all snapshots must share one shape.
pub(crate) fn fit_matrices(
    mats: &[&Array2<f64>],
    init: Vec<(Array2<f64>, Array2<f64>)>,
    cfg: &FitConfig,
) -> Result<(Vec<(Array2<f64>, Array2<f64>)>, FitReport)> {
    cfg.validate()?;
    let t_len = mats.len();
    assert!(t_len > 0 && init.len() == t_len);
    let (n_rows, n_cols) = mats[0].dim();
    for a in mats {
        assert_eq!(a.dim(), (n_rows, n_cols), "snapshots must share one shape");
    }
    if cfg.k > n_rows.min(n_cols) {
        return Err(Error::RankTooLarge { k: cfg.k, n: n_rows.min(n_cols) });
    }
    for (u, v) in &init {
        if u.dim() != (n_rows, cfg.k) || v.dim() != (n_cols, cfg.k) {
            return Err(Error::DimensionMismatch(format!(
                "initial factors {:?}/{:?} do not match data {n_rows}x{n_cols} at rank {}",
                u.dim(),
                v.dim(),
                cfg.k
            )));
        }
    }

    let ctxs: Vec<SnapshotCtx> = mats.iter().map(|a| SnapshotCtx::new(a)).collect();
    let (mut us, mut vs): (Vec<_>, Vec<_>) = init.into_iter().unzip();

    let mut num_u = Array2::zeros((n_rows, cfg.k));
    let mut num_v = Array2::zeros((n_cols, cfg.k));

    let mut prev = objective_matrices(&ctxs, &us, &vs, cfg.lambda_t, cfg.lambda_s, cfg.window);
    let mut trace = Vec::new();
    let mut iterations_run = 0;
    let mut converged = false;

    for it in 1..=cfg.max_iter {
        for t in 0..t_len {
            ctxs[t].rows.mul_into(&vs[t], &mut num_u);
            let vtv = vs[t].t().dot(&vs[t]);
            let mut ridge = 0.0;
            if cfg.lambda_t > 0.0 {
                let mut m = 0usize;
                for s in window_neighbors(t, t_len, cfg.window) {
                    if s == t {
                        continue;
                    }
                    m += 1;
                    num_u.scaled_add(2.0 * cfg.lambda_t, &us[s]);
                }
                ridge = 2.0 * m as f64 * cfg.lambda_t;
            }
            multiplicative_step(&mut us[t], &num_u, &vtv, ridge, 0.0, cfg.eps);

            ctxs[t].cols.mul_into(&us[t], &mut num_v);
            let utu = us[t].t().dot(&us[t]);
            multiplicative_step(&mut vs[t], &num_v, &utu, 0.0, 0.5 * cfg.lambda_s, cfg.eps);
        }

        let finite = us
            .iter()
            .chain(vs.iter())
            .all(|m| m.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::NonFinite { iteration: it });
        }
        let obj = objective_matrices(&ctxs, &us, &vs, cfg.lambda_t, cfg.lambda_s, cfg.window);
        if !obj.is_finite() {
            return Err(Error::NonFinite { iteration: it });
        }
        trace.push(obj);
        iterations_run = it;
        let rel = (prev - obj).abs() / prev.max(1e-30);
        if rel < cfg.tol {
            converged = true;
            break;
        }
        prev = obj;
    }

    if cfg.lambda_s > 0.0 {
        for (t, v) in vs.iter().enumerate() {
            for k in 0..cfg.k {
                if v.column(k).iter().all(|&x| x < cfg.eps) {
                    log::warn!(
                        "factor column {k} of snapshot {t} collapsed to zero under the \
                         sparsity penalty; the solution is degenerate"
                    );
                }
            }
        }
    }

    let factors = us.into_iter().zip(vs).collect();
    Ok((factors, FitReport { objective_trace: trace, iterations_run, converged }))
}

/// Solves `min ||A - X B^T||_F^2` over `X >= 0` with `B` fixed, by the same
/// multiplicative rule restricted to one factor. Used by cross-validation.
pub(crate) fn solve_rows_given_basis(
    a: &Array2<f64>,
    basis: &Array2<f64>,
    cfg: &FitConfig,
    seed: u64,
) -> Result<Array2<f64>> {
    let k = basis.ncols();
    let n_rows = a.nrows();
    if a.ncols() != basis.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "data {:?} incompatible with basis {:?}",
            a.dim(),
            basis.dim()
        )));
    }
    let csr = Csr::from_dense(a);
    let gram = basis.t().dot(basis);
    let num = {
        let mut num = Array2::zeros((n_rows, k));
        csr.mul_into(basis, &mut num);
        num
    };
    let mut rng = crate::factor::seeded_rng(seed);
    let mut x = crate::factor::random_positive(n_rows, k, &mut rng);

    let residual = |x: &Array2<f64>| {
        let xtx = x.t().dot(x);
        residual_sq(&csr, x, basis, &xtx, &gram)
    };
    let mut prev = residual(&x);
    for it in 1..=cfg.max_iter {
        multiplicative_step(&mut x, &num, &gram, 0.0, 0.0, cfg.eps);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: it });
        }
        let r = residual(&x);
        if (prev - r).abs() / prev.max(1e-30) < cfg.tol {
            break;
        }
        prev = r;
    }
    Ok(x)
}
