//! Reading structure out of fitted factors: edge decompositions, node
//! memberships, hub/authority scores, and display-stable rescaling.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::factor::{FactorPair, FactorSequence, FitConfig};
use crate::fit_static::{fit_sparse_nmf, normalize_columns};
use crate::graph::GraphSnapshot;

/// Denominators below this are treated as structurally zero when forming
/// shares and memberships.
pub const SHARE_EPS: f64 = 1e-12;

/// Soft and hard node-to-community assignments. Community ids are 1-based;
/// `None` marks nodes with no mass to assign.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub soft: Array2<f64>,
    pub hard: Vec<Option<usize>>,
}

impl Membership {
    pub fn n(&self) -> usize {
        self.soft.nrows()
    }

    pub fn k(&self) -> usize {
        self.soft.ncols()
    }
}

/// How the fitted weight of one edge splits across communities.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeShares {
    /// `None` when the predicted weight is structurally zero.
    pub shares: Option<Vec<f64>>,
    pub predicted_weight: f64,
}

/// Splits the fitted weight of edge `(i, j)` across communities:
/// `share_k = U[i,k] V[j,k] / sum_k U[i,k] V[j,k]`.
pub fn edge_decomposition(f: &FactorPair, i: usize, j: usize) -> Result<EdgeShares> {
    let n = f.n();
    for index in [i, j] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, n });
        }
    }
    let contributions: Vec<f64> = (0..f.k()).map(|k| f.u()[[i, k]] * f.v()[[j, k]]).collect();
    let predicted_weight: f64 = contributions.iter().sum();
    let shares = if predicted_weight < SHARE_EPS {
        None
    } else {
        Some(contributions.iter().map(|c| c / predicted_weight).collect())
    };
    Ok(EdgeShares { shares, predicted_weight })
}

fn argmax_smallest(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = k;
        }
    }
    best
}

/// Memberships from the relative magnitude of each row of `U`; rows whose
/// total mass is below [`SHARE_EPS`] come back unassigned.
pub fn membership_from_u(u: &Array2<f64>) -> Result<Membership> {
    for &x in u.iter() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::InvalidInput("membership needs finite non-negative factors".into()));
        }
    }
    let (n, k) = u.dim();
    let mut soft = Array2::zeros((n, k));
    let mut hard = Vec::with_capacity(n);
    for i in 0..n {
        let total: f64 = u.row(i).sum();
        if total < SHARE_EPS {
            hard.push(None);
            continue;
        }
        for j in 0..k {
            soft[[i, j]] = u[[i, j]] / total;
        }
        let row: Vec<f64> = soft.row(i).to_vec();
        hard.push(Some(argmax_smallest(&row) + 1));
    }
    Ok(Membership { soft, hard })
}

/// Memberships from labeled edges: every observed edge goes to the community
/// with the largest fitted contribution, and each node is scored by the label
/// proportions over its incident (incoming plus outgoing) observed edges.
/// Isolated nodes come back unassigned.
pub fn membership_from_edges(a: &GraphSnapshot, f: &FactorPair) -> Result<Membership> {
    if f.n() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "factors have {} rows for a graph on {} nodes",
            f.n(),
            a.n()
        )));
    }
    let (n, k) = (a.n(), f.k());
    let mut counts = Array2::<f64>::zeros((n, k));
    for ((i, j), &w) in a.weights().indexed_iter() {
        if w <= 0.0 {
            continue;
        }
        let contributions: Vec<f64> = (0..k).map(|c| f.u()[[i, c]] * f.v()[[j, c]]).collect();
        let label = argmax_smallest(&contributions);
        counts[[i, label]] += 1.0;
        if j != i {
            counts[[j, label]] += 1.0;
        }
    }
    let mut soft = Array2::zeros((n, k));
    let mut hard = Vec::with_capacity(n);
    for i in 0..n {
        let total: f64 = counts.row(i).sum();
        if total == 0.0 {
            hard.push(None);
            continue;
        }
        for c in 0..k {
            soft[[i, c]] = counts[[i, c]] / total;
        }
        let row: Vec<f64> = soft.row(i).to_vec();
        hard.push(Some(argmax_smallest(&row) + 1));
    }
    Ok(Membership { soft, hard })
}

fn power_iteration(
    apply: impl Fn(&Array1<f64>) -> Array1<f64>,
    n: usize,
    tol: f64,
    max_iter: usize,
    operator: &'static str,
) -> Result<Array1<f64>> {
    let mut x = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    for _ in 0..max_iter {
        let y = apply(&x);
        let norm = y.mapv(|v| v * v).sum().sqrt();
        if norm == 0.0 {
            // the operator annihilates the positive cone; nothing to rank
            return Ok(Array1::zeros(n));
        }
        let y = y.mapv(|v| v / norm);
        let delta = (&y - &x).mapv(|d| d * d).sum().sqrt();
        x = y;
        if delta < tol {
            return Ok(fix_sign(x));
        }
    }
    Err(Error::PowerIteration {
        operator,
        iterations: max_iter,
        last_iterate: x.to_vec(),
    })
}

fn fix_sign(mut x: Array1<f64>) -> Array1<f64> {
    let mut lead = 0.0f64;
    for &v in x.iter() {
        if v.abs() > lead.abs() {
            lead = v;
        }
    }
    if lead < 0.0 {
        x.mapv_inplace(|v| -v);
    }
    x
}

/// Hub and authority scores: unit-norm leading eigenvectors of `A A^T` and
/// `A^T A`, by power iteration from a positive start.
pub fn hub_authority(
    a: &GraphSnapshot,
    tol: f64,
    max_iter: usize,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be finite and > 0".into()));
    }
    let w = a.weights();
    let n = a.n();
    let hub = power_iteration(|x| w.dot(&w.t().dot(x)), n, tol, max_iter, "A A^T")?;
    let authority = power_iteration(|x| w.t().dot(&w.dot(x)), n, tol, max_iter, "A^T A")?;
    Ok((hub, authority))
}

fn cosine(x: &Array1<f64>, y: &Array1<f64>) -> f64 {
    let nx = x.mapv(|v| v * v).sum().sqrt();
    let ny = y.mapv(|v| v * v).sum().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    x.dot(y) / (nx * ny)
}

/// Cosine similarities between the column-normalized rank-1 factors and the
/// hub/authority vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Equivalence {
    pub cosine_u_hub: f64,
    pub cosine_v_authority: f64,
}

/// Fits an unpenalized rank-1 factorization and reports how closely its
/// normalized factors match the hub and authority scores.
pub fn rank1_equivalence_check(a: &GraphSnapshot, cfg: &FitConfig) -> Result<Rank1Equivalence> {
    if cfg.k != 1 || cfg.lambda_s != 0.0 {
        return Err(Error::InvalidConfig(
            "rank-1 equivalence needs k = 1 and lambda_s = 0".into(),
        ));
    }
    let (f, _) = fit_sparse_nmf(a, cfg)?;
    let (u, v) = normalize_columns(f.u(), f.v());
    let (hub, authority) = hub_authority(a, 1e-13, 100_000)?;
    let u_col = Array1::from_iter(u.column(0).iter().copied());
    let v_col = Array1::from_iter(v.column(0).iter().copied());
    Ok(Rank1Equivalence {
        cosine_u_hub: cosine(&u_col, &hub),
        cosine_v_authority: cosine(&v_col, &authority),
    })
}

/// Rescales every `U_t` column to unit l2 norm, pushing the scale onto `V_t`;
/// reconstructions are unchanged and zero columns are left alone.
pub fn normalize_for_display(fs: &FactorSequence) -> FactorSequence {
    let pairs = fs
        .pairs()
        .iter()
        .map(|p| {
            let (u, v) = normalize_columns(p.u(), p.v());
            FactorPair::new(u, v).expect("rescaling keeps factors valid")
        })
        .collect();
    FactorSequence::new(pairs).expect("same shape as input")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{gen_ring, gen_star};
    use ndarray::array;
    use proptest::prelude::*;

    fn pair(u: Array2<f64>, v: Array2<f64>) -> FactorPair {
        FactorPair::new(u, v).unwrap()
    }

    #[test]
    fn single_community_takes_the_whole_edge() {
        let f = pair(array![[2.0], [1.0]], array![[0.5], [1.0]]);
        let s = edge_decomposition(&f, 0, 1).unwrap();
        assert_eq!(s.shares.unwrap(), vec![1.0]);
        assert!((s.predicted_weight - 2.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_supports_have_undefined_shares() {
        let f = pair(array![[1.0, 0.0], [0.0, 1.0]], array![[1.0, 0.0], [0.0, 1.0]]);
        let s = edge_decomposition(&f, 0, 1).unwrap();
        assert_eq!(s.predicted_weight, 0.0);
        assert!(s.shares.is_none());
    }

    #[test]
    fn shares_follow_the_contributions() {
        let f = pair(array![[2.0, 1.0], [0.0, 0.0]], array![[0.0, 0.0], [1.0, 1.0]]);
        let s = edge_decomposition(&f, 0, 1).unwrap();
        let shares = s.shares.unwrap();
        assert!((shares[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((shares[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_nodes_are_rejected() {
        let f = pair(array![[1.0]], array![[1.0]]);
        assert!(edge_decomposition(&f, 0, 1).is_err());
    }

    #[test]
    fn membership_rows_normalize_and_label() {
        let m = membership_from_u(&array![[5.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(m.soft.row(0).to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(m.hard[0], Some(1));
        assert_eq!(m.soft.row(1).to_vec(), vec![0.5, 0.5, 0.0]);
        assert_eq!(m.hard[1], Some(1)); // tie goes to the smaller id
        assert_eq!(m.hard[2], None);
    }

    #[test]
    fn edge_rule_follows_incident_edge_proportions() {
        // 3 nodes; edges 0->1, 0->2, 1->2. Factors put edge (0,1) and (0,2)
        // in community 1 and edge (1,2) in community 2.
        let w = array![[0.0, 1.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]];
        let a = GraphSnapshot::new(w, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let u = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let v = array![[0.0, 0.0], [1.0, 0.1], [1.0, 2.0]];
        let m = membership_from_edges(&a, &pair(u, v)).unwrap();
        // node 0: two incident edges, both community 1
        assert_eq!(m.hard[0], Some(1));
        assert_eq!(m.soft.row(0).to_vec(), vec![1.0, 0.0]);
        // node 1: edges (0,1) labeled 1 and (1,2) labeled 2
        assert_eq!(m.soft.row(1).to_vec(), vec![0.5, 0.5]);
        assert_eq!(m.hard[1], Some(1));
        // node 2: edges (0,2) labeled 1, (1,2) labeled 2
        assert_eq!(m.soft.row(2).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn isolated_nodes_stay_unassigned() {
        let w = array![[0.0, 0.0], [0.0, 0.0]];
        let a = GraphSnapshot::new(w, vec!["a".into(), "b".into()]).unwrap();
        let m = membership_from_edges(&a, &pair(array![[1.0], [1.0]], array![[1.0], [1.0]])).unwrap();
        assert_eq!(m.hard, vec![None, None]);
    }

    #[test]
    fn uniform_edge_labels_assign_everyone() {
        let w = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let a = GraphSnapshot::new(w, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        // community 2 dominates every edge
        let u = array![[0.1, 1.0], [0.1, 1.0], [0.1, 1.0]];
        let v = array![[0.1, 1.0], [0.1, 1.0], [0.1, 1.0]];
        let m = membership_from_edges(&a, &pair(u, v)).unwrap();
        assert!(m.hard.iter().all(|h| *h == Some(2)));
    }

    #[test]
    fn star_hub_and_authority_match_the_known_scores() {
        let a = gen_star(5).unwrap();
        let (hub, authority) = hub_authority(&a, 1e-12, 10_000).unwrap();
        let expect_hub = [1.0, 0.0, 0.0, 0.0, 0.0];
        let expect_auth = [0.0, 0.5, 0.5, 0.5, 0.5];
        for i in 0..5 {
            assert!((hub[i] - expect_hub[i]).abs() < 1e-8);
            assert!((authority[i] - expect_auth[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn ring_scores_are_uniform() {
        let a = gen_ring(5).unwrap();
        let (hub, authority) = hub_authority(&a, 1e-12, 100_000).unwrap();
        let e = 1.0 / 5f64.sqrt();
        for i in 0..5 {
            assert!((hub[i] - e).abs() < 1e-6, "hub[{i}] = {}", hub[i]);
            assert!((authority[i] - e).abs() < 1e-6);
        }
    }

    #[test]
    fn power_iteration_matches_a_dense_eigensolver() {
        use crate::factor::seeded_rng;
        use rand::Rng;
        for seed in 0..8u64 {
            let mut rng = seeded_rng(1000 + seed);
            let n = 6;
            let w = Array2::from_shape_fn((n, n), |_| {
                if rng.gen::<f64>() < 0.5 { rng.gen::<f64>() } else { 0.0 }
            });
            if w.sum() == 0.0 {
                continue;
            }
            let labels = (0..n).map(|i| i.to_string()).collect();
            let a = GraphSnapshot::new(w.clone(), labels).unwrap();
            let (hub, authority) = hub_authority(&a, 1e-13, 200_000).unwrap();

            let oracle = |m: Array2<f64>| {
                let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
                let eig = dm.symmetric_eigen();
                let lead = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                let col = eig.eigenvectors.column(lead);
                let mut v: Vec<f64> = col.iter().copied().collect();
                let max = v.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
                if max < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            };
            let hub_oracle = oracle(w.dot(&w.t()));
            let auth_oracle = oracle(w.t().dot(&w));
            for i in 0..n {
                assert!((hub[i] - hub_oracle[i]).abs() < 1e-8, "seed {seed} hub[{i}]");
                assert!((authority[i] - auth_oracle[i]).abs() < 1e-8, "seed {seed} auth[{i}]");
            }
        }
    }

    #[test]
    fn hub_scores_ignore_global_weight_scale() {
        let a = gen_star(6).unwrap();
        let scaled = GraphSnapshot::new(a.weights() * 7.5, a.labels().to_vec()).unwrap();
        let (h1, t1) = hub_authority(&a, 1e-12, 10_000).unwrap();
        let (h2, t2) = hub_authority(&scaled, 1e-12, 10_000).unwrap();
        assert!((&h1 - &h2).mapv(f64::abs).sum() < 1e-9);
        assert!((&t1 - &t2).mapv(f64::abs).sum() < 1e-9);
    }

    #[test]
    fn zero_iteration_budget_reports_the_last_iterate() {
        let a = gen_ring(5).unwrap();
        match hub_authority(&a, 1e-16, 1) {
            Err(Error::PowerIteration { last_iterate, .. }) => {
                assert_eq!(last_iterate.len(), 5)
            }
            other => panic!("expected power-iteration error, got {other:?}"),
        }
    }

    #[test]
    fn rank1_factors_are_rescaled_hub_and_authority() {
        let cfg = FitConfig::new(1).with_tol(1e-13).with_max_iter(20_000).with_seed(2);
        for a in [gen_star(5).unwrap(), gen_ring(5).unwrap()] {
            let r = rank1_equivalence_check(&a, &cfg).unwrap();
            assert!(r.cosine_u_hub >= 1.0 - 1e-6, "{r:?}");
            assert!(r.cosine_v_authority >= 1.0 - 1e-6, "{r:?}");
        }
    }

    #[test]
    fn rank1_check_requires_unpenalized_rank_one() {
        let a = gen_star(4).unwrap();
        assert!(rank1_equivalence_check(&a, &FitConfig::new(2)).is_err());
        assert!(rank1_equivalence_check(&a, &FitConfig::new(1).with_lambda_s(1.0)).is_err());
    }

    #[test]
    fn display_normalization_preserves_reconstruction() {
        let fs = FactorSequence::new(vec![pair(
            array![[3.0, 0.0], [4.0, 2.0]],
            array![[1.0, 1.0], [1.0, 3.0]],
        )])
        .unwrap();
        let out = normalize_for_display(&fs);
        let before = fs.pairs()[0].product();
        let after = out.pairs()[0].product();
        assert!((&before - &after).mapv(f64::abs).iter().all(|&d| d < 1e-12));
        let twice = normalize_for_display(&out);
        assert_eq!(out, twice);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn soft_rows_sum_to_one_or_are_flagged(
            rows in proptest::collection::vec(
                proptest::collection::vec(0.0f64..5.0, 3),
                1..12,
            )
        ) {
            let n = rows.len();
            let u = Array2::from_shape_fn((n, 3), |(i, j)| rows[i][j]);
            let m = membership_from_u(&u).unwrap();
            for i in 0..n {
                match m.hard[i] {
                    Some(label) => {
                        let sum: f64 = m.soft.row(i).sum();
                        prop_assert!((sum - 1.0).abs() <= 1e-9);
                        prop_assert!(label >= 1 && label <= 3);
                    }
                    None => prop_assert!(m.soft.row(i).sum() == 0.0),
                }
            }
        }

        #[test]
        fn hard_labels_ignore_positive_row_scaling(
            rows in proptest::collection::vec(
                proptest::collection::vec(0.0f64..5.0, 4),
                1..10,
            ),
            scales in proptest::collection::vec(0.01f64..100.0, 10),
        ) {
            let n = rows.len();
            let u = Array2::from_shape_fn((n, 4), |(i, j)| rows[i][j]);
            let scaled = Array2::from_shape_fn((n, 4), |(i, j)| rows[i][j] * scales[i]);
            let a = membership_from_u(&u).unwrap();
            let b = membership_from_u(&scaled).unwrap();
            prop_assert_eq!(a.hard, b.hard);
        }

        #[test]
        fn defined_shares_sum_to_one(
            u_row in proptest::collection::vec(0.0f64..3.0, 1..5),
            v_row in proptest::collection::vec(0.0f64..3.0, 1..5),
        ) {
            let k = u_row.len().min(v_row.len());
            let u = Array2::from_shape_fn((1, k), |(_, j)| u_row[j]);
            let v = Array2::from_shape_fn((1, k), |(_, j)| v_row[j]);
            let f = FactorPair::new(u, v).unwrap();
            let s = edge_decomposition(&f, 0, 0).unwrap();
            if let Some(shares) = s.shares {
                let total: f64 = shares.iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-9);
            }
        }
    }
}
