//! Seeded graph generators used to validate the factorization pipeline.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::factor::seeded_rng;
use crate::graph::{GraphSequence, GraphSnapshot};

fn numbered_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Star on `n` nodes: node 1 points at everyone else.
pub fn gen_star(n: usize) -> Result<GraphSnapshot> {
    if n < 2 {
        return Err(Error::InvalidConfig("a star needs at least 2 nodes".into()));
    }
    let mut w = Array2::zeros((n, n));
    for j in 1..n {
        w[[0, j]] = 1.0;
    }
    GraphSnapshot::new(w, numbered_labels(n))
}

/// Symmetric cycle on `n` nodes: edges between `i` and `i+1 (mod n)` in both
/// directions.
pub fn gen_ring(n: usize) -> Result<GraphSnapshot> {
    if n < 3 {
        return Err(Error::InvalidConfig("a ring needs at least 3 nodes".into()));
    }
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        let j = (i + 1) % n;
        w[[i, j]] = 1.0;
        w[[j, i]] = 1.0;
    }
    GraphSnapshot::new(w, numbered_labels(n))
}

/// Growth process observed at evenly spaced points.
#[derive(Debug, Clone, PartialEq)]
pub struct PaGrowthConfig {
    /// Final node count; must be divisible by `snapshots`.
    pub n_total: usize,
    pub snapshots: usize,
    /// Edges per arriving node.
    pub m: usize,
    pub seed: u64,
}

/// Degree-proportional attachment. Nodes arrive one at a time; the first
/// `m + 1` arrivals wire up into a clique (each new one connects to all
/// earlier ones), and every later arrival draws `m` distinct targets with
/// probability proportional to current total degree. Edges are stored in the
/// new-node -> target direction and attachment is permanent, so each snapshot
/// is an edge-superset of the previous one. Every snapshot carries the full
/// `n_total` node set; not-yet-arrived nodes have zero rows and columns.
pub fn gen_preferential_attachment(cfg: &PaGrowthConfig) -> Result<GraphSequence> {
    if cfg.snapshots == 0 || cfg.n_total == 0 {
        return Err(Error::InvalidConfig("need at least one snapshot and one node".into()));
    }
    if cfg.n_total % cfg.snapshots != 0 {
        return Err(Error::InvalidConfig(format!(
            "node count {} is not divisible by {} snapshots",
            cfg.n_total, cfg.snapshots
        )));
    }
    if cfg.m == 0 {
        return Err(Error::InvalidConfig("each arrival must add at least one edge".into()));
    }
    if cfg.n_total < cfg.m + 2 {
        return Err(Error::InvalidConfig(format!(
            "{} nodes cannot seed a clique of {} plus arrivals",
            cfg.n_total,
            cfg.m + 1
        )));
    }

    let n = cfg.n_total;
    let step = n / cfg.snapshots;
    let mut rng = seeded_rng(cfg.seed);
    let mut degrees = vec![0usize; n];
    let mut total_degree = 0usize;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut weights = Array2::zeros((n, n));
    let labels = numbered_labels(n);

    let mut snapshots = Vec::with_capacity(cfg.snapshots);
    let mut chosen = Vec::with_capacity(cfg.m);
    for arrival in 0..n {
        if arrival > 0 {
            chosen.clear();
            if arrival <= cfg.m {
                // clique bootstrap: connect to every earlier node
                chosen.extend(0..arrival);
            } else {
                while chosen.len() < cfg.m {
                    let mut ticket = rng.gen_range(0..total_degree - chosen.iter().map(|&c| degrees[c]).sum::<usize>());
                    for target in 0..arrival {
                        if chosen.contains(&target) {
                            continue;
                        }
                        if ticket < degrees[target] {
                            chosen.push(target);
                            break;
                        }
                        ticket -= degrees[target];
                    }
                }
            }
            for &target in &chosen {
                edges.push((arrival, target));
                weights[[arrival, target]] = 1.0;
                degrees[arrival] += 1;
                degrees[target] += 1;
                total_degree += 2;
            }
        }
        if (arrival + 1) % step == 0 {
            snapshots.push(GraphSnapshot::new(weights.clone(), labels.clone())?);
        }
    }
    let tags = (1..=cfg.snapshots).map(|t| t.to_string()).collect();
    GraphSequence::new(snapshots, Some(tags))
}

/// Planted-community sequence: directed Bernoulli edges, denser inside
/// same-label pairs than across.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n: usize,
    /// Number of communities.
    pub k: usize,
    /// Within-community edge probability.
    pub p_in: f64,
    /// Between-community edge probability; must be strictly below `p_in`.
    pub p_out: f64,
    /// Snapshots to generate.
    pub t_len: usize,
    /// Fraction of nodes relabeled uniformly between consecutive snapshots.
    pub churn: f64,
    pub seed: u64,
}

/// Generates the sequence together with the 1-based ground-truth label of
/// every node at every snapshot.
pub fn gen_planted_communities(
    cfg: &PlantedConfig,
) -> Result<(GraphSequence, Vec<Vec<usize>>)> {
    if cfg.n == 0 || cfg.k == 0 || cfg.k > cfg.n {
        return Err(Error::InvalidConfig(format!(
            "cannot plant {} communities in {} nodes",
            cfg.k, cfg.n
        )));
    }
    if cfg.t_len == 0 {
        return Err(Error::InvalidConfig("need at least one snapshot".into()));
    }
    if !(0.0..=1.0).contains(&cfg.p_out) || !(0.0..=1.0).contains(&cfg.p_in) || cfg.p_out >= cfg.p_in {
        return Err(Error::InvalidConfig(format!(
            "need 0 <= p_out < p_in <= 1, got p_in {} and p_out {}",
            cfg.p_in, cfg.p_out
        )));
    }
    if !(0.0..=1.0).contains(&cfg.churn) {
        return Err(Error::InvalidConfig("churn must lie in [0, 1]".into()));
    }

    let mut rng = seeded_rng(cfg.seed);
    let labels = numbered_labels(cfg.n);
    // contiguous, balanced initial communities
    let mut truth: Vec<usize> = (0..cfg.n).map(|i| i * cfg.k / cfg.n + 1).collect();
    let mut truth_per_t = Vec::with_capacity(cfg.t_len);
    let mut snapshots = Vec::with_capacity(cfg.t_len);

    for t in 0..cfg.t_len {
        if t > 0 && cfg.churn > 0.0 {
            let moves = (cfg.churn * cfg.n as f64).round() as usize;
            let picks = rand::seq::index::sample(&mut rng, cfg.n, moves.min(cfg.n));
            for i in picks {
                truth[i] = rng.gen_range(0..cfg.k) + 1;
            }
        }
        let mut w = Array2::zeros((cfg.n, cfg.n));
        for i in 0..cfg.n {
            for j in 0..cfg.n {
                if i == j {
                    continue;
                }
                let p = if truth[i] == truth[j] { cfg.p_in } else { cfg.p_out };
                if rng.gen::<f64>() < p {
                    w[[i, j]] = 1.0;
                }
            }
        }
        snapshots.push(GraphSnapshot::new(w, labels.clone())?);
        truth_per_t.push(truth.clone());
    }
    let tags = (1..=cfg.t_len).map(|t| t.to_string()).collect();
    Ok((GraphSequence::new(snapshots, Some(tags))?, truth_per_t))
}
