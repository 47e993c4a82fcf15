//! Coupled factorization of a snapshot sequence.
//!
//! Each snapshot gets its own `(U_t, V_t)`; a window penalty pulls the row
//! factors of nearby times together and the l1 penalty acts on every `V_t`.
//! The window is truncated at the ends of the sequence, both in the penalty
//! and in the update denominators, so boundary updates stay consistent with
//! the truncated objective.

use crate::engine;
use crate::error::{Error, Result};
use crate::factor::{random_pair, seeded_rng, FactorPair, FactorSequence, FitConfig, FitReport};
use crate::graph::GraphSequence;

/// Truncated window neighborhoods for a sequence of length `t_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    window: usize,
    t_len: usize,
}

impl WindowSpec {
    /// `window` must be even and at least 2 so the half width is integral.
    pub fn new(window: usize, t_len: usize) -> Result<Self> {
        if window < 2 || window % 2 != 0 {
            return Err(Error::InvalidConfig("window must be an even integer >= 2".into()));
        }
        if t_len == 0 {
            return Err(Error::InvalidConfig("window spec needs at least one snapshot".into()));
        }
        Ok(Self { window, t_len })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    /// In-range neighbors of `t` (0-based), excluding `t` itself.
    pub fn neighbors(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        engine::window_neighbors(t, self.t_len, self.window).filter(move |&s| s != t)
    }

    /// `m(t)`: the truncated neighborhood size.
    pub fn neighbor_count(&self, t: usize) -> usize {
        self.neighbors(t).count()
    }
}

/// Sequence objective: summed reconstruction error, the window penalty on the
/// row factors (each ordered neighbor pair counted, i.e. unordered pairs
/// twice), and the l1 penalty on the column factors.
pub fn objective_dynamic(
    seq: &GraphSequence,
    fs: &FactorSequence,
    lambda_t: f64,
    lambda_s: f64,
    win: &WindowSpec,
) -> Result<f64> {
    for (name, value) in [("lambda_t", lambda_t), ("lambda_s", lambda_s)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
        }
    }
    if fs.len() != seq.len() || win.t_len() != seq.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} factor pairs and a window over {} steps for {} snapshots",
            fs.len(),
            win.t_len(),
            seq.len()
        )));
    }
    if fs.n() != seq.n() {
        return Err(Error::DimensionMismatch(format!(
            "factors have {} rows for a graph on {} nodes",
            fs.n(),
            seq.n()
        )));
    }
    let mut fit = 0.0;
    for (snap, pair) in seq.snapshots().iter().zip(fs.pairs()) {
        fit += (snap.weights() - &pair.product()).mapv(|x| x * x).sum();
    }
    let mut smooth = 0.0;
    for t in 0..fs.len() {
        for s in win.neighbors(t) {
            smooth += (fs.pairs()[t].u() - fs.pairs()[s].u()).mapv(|d| d * d).sum();
        }
    }
    let sparsity: f64 = fs.pairs().iter().map(|p| p.v().sum()).sum();
    Ok(fit + lambda_t * smooth + lambda_s * sparsity)
}

/// Fits every snapshot jointly from a seeded initialization (the pair for
/// `t = 0` is drawn first, then `t = 1`, and so on, from one generator).
/// On a single snapshot this reduces bit-for-bit to [`crate::fit_sparse_nmf`]
/// with the same seed.
pub fn fit_dynamic_nmf(seq: &GraphSequence, cfg: &FitConfig) -> Result<(FactorSequence, FitReport)> {
    cfg.validate()?;
    if cfg.k > seq.n() {
        return Err(Error::RankTooLarge { k: cfg.k, n: seq.n() });
    }
    let mut rng = seeded_rng(cfg.seed);
    let init = (0..seq.len())
        .map(|_| {
            let (u, v) = random_pair(seq.n(), cfg.k, &mut rng);
            FactorPair::new(u, v)
        })
        .collect::<Result<Vec<_>>>()?;
    fit_dynamic_nmf_from(seq, &FactorSequence::new(init)?, cfg)
}

/// [`fit_dynamic_nmf`] warm-started from explicit per-snapshot factors.
pub fn fit_dynamic_nmf_from(
    seq: &GraphSequence,
    init: &FactorSequence,
    cfg: &FitConfig,
) -> Result<(FactorSequence, FitReport)> {
    cfg.validate()?;
    if init.len() != seq.len() || init.n() != seq.n() || init.k() != cfg.k {
        return Err(Error::DimensionMismatch(format!(
            "initial factors ({} pairs, {}x{}) do not match {} snapshots on {} nodes at rank {}",
            init.len(),
            init.n(),
            init.k(),
            seq.len(),
            seq.n(),
            cfg.k
        )));
    }
    let mats: Vec<_> = seq.snapshots().iter().map(|s| s.weights()).collect();
    let init = init
        .pairs()
        .iter()
        .map(|p| (p.u().clone(), p.v().clone()))
        .collect();
    let (pairs, report) = engine::fit_matrices(&mats, init, cfg)?;
    let pairs = pairs
        .into_iter()
        .map(|(u, v)| FactorPair::new(u, v))
        .collect::<Result<Vec<_>>>()?;
    Ok((FactorSequence::new(pairs)?, report))
}

/// `||U_{t+1} - U_t||_F` for consecutive snapshots; a flat profile means the
/// community structure holds still.
pub fn smoothness_profile(fs: &FactorSequence) -> Result<Vec<f64>> {
    if fs.len() < 2 {
        return Err(Error::InvalidInput(
            "smoothness profile needs at least two snapshots".into(),
        ));
    }
    Ok(fs
        .pairs()
        .windows(2)
        .map(|w| (w[1].u() - w[0].u()).mapv(|d| d * d).sum().sqrt())
        .collect())
}
