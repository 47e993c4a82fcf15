//! Rank selection by two-dimensional cross-validation.
//!
//! Rows and columns are partitioned once; the identical row-group x
//! column-group block is held out of every snapshot, the model is trained on
//! the complementary block, the held-out block is predicted from two
//! single-factor solves against the trained basis, and ranks are scored by
//! summed squared prediction error.

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::engine;
use crate::error::{Error, Result};
use crate::factor::{random_positive, seeded_rng, FitConfig};
use crate::graph::GraphSequence;

/// A row partition and a column partition of `{0..n}`, shared by every
/// snapshot of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutPlan {
    pub row_groups: Vec<Vec<usize>>,
    pub col_groups: Vec<Vec<usize>>,
    pub seed: u64,
}

fn partition(n: usize, groups: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let base = n / groups;
    let extra = n % groups;
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for g in 0..groups {
        let size = base + usize::from(g < extra);
        let mut group: Vec<usize> = idx[start..start + size].to_vec();
        group.sort_unstable();
        out.push(group);
        start += size;
    }
    out
}

/// Seeded uniform partition into `k` row groups and `l` column groups whose
/// sizes differ by at most one.
pub fn make_holdout(n: usize, k: usize, l: usize, seed: u64) -> Result<HoldoutPlan> {
    for (name, folds) in [("row", k), ("column", l)] {
        if folds < 2 || folds > n {
            return Err(Error::InvalidConfig(format!(
                "{name} fold count {folds} outside 2..={n}"
            )));
        }
    }
    let mut rng = seeded_rng(seed);
    let row_groups = partition(n, k, &mut rng);
    let col_groups = partition(n, l, &mut rng);
    Ok(HoldoutPlan { row_groups, col_groups, seed })
}

/// Test error of one fold and one rank.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CvCell {
    pub k: usize,
    pub fold: usize,
    pub test_error: f64,
}

/// Mean test error of one rank over all folds.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CvMean {
    pub k: usize,
    pub mean_test_error: f64,
}

/// Every fold error, per-rank means, and the selected rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub grid: Vec<usize>,
    pub folds: usize,
    pub errors: Vec<CvCell>,
    pub mean: Vec<CvMean>,
    pub chosen_k: usize,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(base);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

fn validate_index_set(name: &str, set: &[usize], n: usize) -> Result<HashSet<usize>> {
    if set.is_empty() {
        return Err(Error::InvalidInput(format!("{name} holdout set is empty")));
    }
    let mut out = HashSet::with_capacity(set.len());
    for &i in set {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if !out.insert(i) {
            return Err(Error::InvalidInput(format!("{name} holdout set repeats index {i}")));
        }
    }
    Ok(out)
}

/// Scores one `(rows, cols)` holdout block at rank `k`:
/// a rank-`k` unpenalized sequence fit on the training block, one
/// fixed-basis solve for the held-out rows, one for the held-out columns,
/// and the summed squared error of the resulting block prediction.
/// Penalties in `cfg` are ignored; tolerance, iteration cap, guard and seed
/// are taken from it.
pub fn cv_fold_error(
    seq: &GraphSequence,
    k: usize,
    rows: &[usize],
    cols: &[usize],
    cfg: &FitConfig,
) -> Result<f64> {
    let n = seq.n();
    let row_set = validate_index_set("row", rows, n)?;
    let col_set = validate_index_set("column", cols, n)?;
    let train_rows: Vec<usize> = (0..n).filter(|i| !row_set.contains(i)).collect();
    let train_cols: Vec<usize> = (0..n).filter(|j| !col_set.contains(j)).collect();
    if train_rows.is_empty() || train_cols.is_empty() {
        return Err(Error::EmptyTrainingBlock);
    }

    let mut fit_cfg = cfg.clone();
    fit_cfg.k = k;
    fit_cfg.lambda_s = 0.0;
    fit_cfg.lambda_t = 0.0;

    let fold_tag = mix_seed(cfg.seed, &[k as u64, rows[0] as u64, cols[0] as u64, rows.len() as u64, cols.len() as u64]);

    // (i) train on the complementary block of every snapshot
    let train_mats: Vec<Array2<f64>> = seq
        .snapshots()
        .iter()
        .map(|s| s.weights().select(Axis(0), &train_rows).select(Axis(1), &train_cols))
        .collect();
    let train_refs: Vec<&Array2<f64>> = train_mats.iter().collect();
    let mut rng = seeded_rng(fold_tag);
    let init = (0..seq.len())
        .map(|_| {
            let u = random_positive(train_rows.len(), k, &mut rng);
            let v = random_positive(train_cols.len(), k, &mut rng);
            (u, v)
        })
        .collect();
    let (trained, _) = engine::fit_matrices(&train_refs, init, &fit_cfg)?;

    let mut error = 0.0;
    for (t, snap) in seq.snapshots().iter().enumerate() {
        let (u_train, v_train) = &trained[t];
        // (ii) held-out rows against the trained column basis
        let row_block = snap.weights().select(Axis(0), rows).select(Axis(1), &train_cols);
        let u_held = engine::solve_rows_given_basis(
            &row_block,
            v_train,
            &fit_cfg,
            mix_seed(fold_tag, &[1, t as u64]),
        )?;
        // (iii) held-out columns against the trained row basis
        let col_block = snap.weights().select(Axis(0), &train_rows).select(Axis(1), cols);
        let v_held = engine::solve_rows_given_basis(
            &col_block.t().to_owned(),
            u_train,
            &fit_cfg,
            mix_seed(fold_tag, &[2, t as u64]),
        )?;
        // (iv) predict the held-out block
        let predicted = u_held.dot(&v_held.t());
        let actual = snap.weights().select(Axis(0), rows).select(Axis(1), cols);
        error += (&actual - &predicted).mapv(|x| x * x).sum();
    }
    Ok(error)
}

/// Evaluates every fold of a fresh holdout plan at every rank in the grid and
/// picks the rank with the lowest mean test error, breaking ties toward the
/// smaller rank. Folds are scored in parallel; the report is ordered
/// rank-major, fold-minor regardless of scheduling.
pub fn cv_rank_selection(
    seq: &GraphSequence,
    k_grid: &[usize],
    k_folds: usize,
    l_folds: usize,
    cfg: &FitConfig,
) -> Result<CvReport> {
    if k_grid.is_empty() {
        return Err(Error::InvalidConfig("rank grid is empty".into()));
    }
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid[0] == 0 {
        return Err(Error::InvalidConfig("rank 0 cannot be evaluated".into()));
    }
    let plan = make_holdout(seq.n(), k_folds, l_folds, cfg.seed)?;
    let folds = k_folds * l_folds;

    let jobs: Vec<(usize, usize, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(gi, &k)| (0..folds).map(move |f| (gi, k, f)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(_, k, f)| {
            let rows = &plan.row_groups[f / l_folds];
            let cols = &plan.col_groups[f % l_folds];
            cv_fold_error(seq, k, rows, cols, cfg)
        })
        .collect();

    let mut errors = Vec::with_capacity(jobs.len());
    for ((_, k, f), r) in jobs.iter().zip(results) {
        errors.push(CvCell { k: *k, fold: *f, test_error: r? });
    }

    let mean: Vec<CvMean> = grid
        .iter()
        .enumerate()
        .map(|(gi, &k)| {
            let sum: f64 = errors[gi * folds..(gi + 1) * folds]
                .iter()
                .map(|c| c.test_error)
                .sum();
            CvMean { k, mean_test_error: sum / folds as f64 }
        })
        .collect();

    let mut chosen = mean[0].k;
    let mut best = mean[0].mean_test_error;
    for m in &mean[1..] {
        if m.mean_test_error < best {
            best = m.mean_test_error;
            chosen = m.k;
        }
    }

    Ok(CvReport { grid, folds, errors, mean, chosen_k: chosen })
}
