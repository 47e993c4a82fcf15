//! Network snapshots and snapshot sequences.
//!
//! A snapshot is a directed, non-negatively weighted adjacency matrix with
//! string node labels. A sequence is an ordered list of snapshots over one
//! shared node set, so every matrix in the sequence is conformable with the
//! others even when a node has no edges at a given time.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{Error, Result};

/// One directed, weighted network observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    weights: Array2<f64>,
    labels: Vec<String>,
}

impl GraphSnapshot {
    /// Builds a snapshot, validating non-negativity, finiteness and label
    /// uniqueness. Entry `(i, j)` is the weight of the directed edge `i -> j`.
    pub fn new(weights: Array2<f64>, labels: Vec<String>) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency matrix must be square, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {n}x{n} matrix",
                labels.len()
            )));
        }
        for &w in weights.iter() {
            if !w.is_finite() {
                return Err(Error::InvalidInput("edge weight is not finite".into()));
            }
            if w < 0.0 {
                return Err(Error::InvalidInput("edge weight is negative".into()));
            }
        }
        let mut seen = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if let Some(prev) = seen.insert(l.as_str(), i) {
                return Err(Error::InvalidInput(format!(
                    "duplicate node label {l:?} at positions {prev} and {i}"
                )));
            }
        }
        Ok(Self { weights, labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of structurally present (nonzero) edges.
    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Ordered snapshots over an identical node set.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSequence {
    snapshots: Vec<GraphSnapshot>,
    timestamps: Option<Vec<String>>,
}

impl GraphSequence {
    /// Builds a sequence; all snapshots must share node count and label order,
    /// and timestamps (when given) must be distinct, one per snapshot.
    pub fn new(snapshots: Vec<GraphSnapshot>, timestamps: Option<Vec<String>>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InvalidInput("sequence needs at least one snapshot".into()));
        }
        let first = &snapshots[0];
        for (t, s) in snapshots.iter().enumerate().skip(1) {
            if s.labels() != first.labels() {
                return Err(Error::InvalidInput(format!(
                    "snapshot {t} does not share the node set of snapshot 0"
                )));
            }
        }
        if let Some(tags) = &timestamps {
            if tags.len() != snapshots.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} timestamps for {} snapshots",
                    tags.len(),
                    snapshots.len()
                )));
            }
            let mut seen = HashMap::with_capacity(tags.len());
            for (t, tag) in tags.iter().enumerate() {
                if let Some(prev) = seen.insert(tag.as_str(), t) {
                    return Err(Error::InvalidInput(format!(
                        "duplicate time tag {tag:?} at positions {prev} and {t}"
                    )));
                }
            }
        }
        Ok(Self { snapshots, timestamps })
    }

    /// Number of snapshots.
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one snapshot
    }

    pub fn n(&self) -> usize {
        self.snapshots[0].n()
    }

    pub fn labels(&self) -> &[String] {
        self.snapshots[0].labels()
    }

    pub fn snapshots(&self) -> &[GraphSnapshot] {
        &self.snapshots
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    /// Time tag for snapshot `t`: the stored tag, or the 1-based index.
    pub fn tag(&self, t: usize) -> String {
        match &self.timestamps {
            Some(tags) => tags[t].clone(),
            None => (t + 1).to_string(),
        }
    }
}

/// Parses the edge-list format: one record per line,
/// `time_tag source_label target_label [weight]`, whitespace separated,
/// `#` starting a comment line. One snapshot is produced per distinct time
/// tag, in first-seen tag order; the node set is the union over all records
/// and repeated `(t, i, j)` records sum their weights. With `directed` unset
/// every record is mirrored onto both orientations.
pub fn load_edge_list<R: BufRead>(
    source: R,
    directed: bool,
    default_weight: f64,
) -> Result<GraphSequence> {
    if !(default_weight.is_finite() && default_weight >= 0.0) {
        return Err(Error::InvalidConfig(
            "default weight must be finite and non-negative".into(),
        ));
    }

    let mut tag_index: HashMap<String, usize> = HashMap::new();
    let mut tags: Vec<String> = Vec::new();
    let mut node_index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    // Accumulated weights per (tag, source, target).
    let mut edges: Vec<HashMap<(usize, usize), f64>> = Vec::new();

    for (lineno, line) in source.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() < 3 || cols.len() > 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 3 or 4 columns, found {}", cols.len()),
            });
        }
        let weight = if cols.len() == 4 {
            let w: f64 = cols[3].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("unparsable weight {:?}", cols[3]),
            })?;
            if !w.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("weight {w} is not finite"),
                });
            }
            if w < 0.0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("negative weight {w}"),
                });
            }
            w
        } else {
            default_weight
        };

        let t = *tag_index.entry(cols[0].to_string()).or_insert_with(|| {
            tags.push(cols[0].to_string());
            edges.push(HashMap::new());
            tags.len() - 1
        });
        let mut intern = |label: &str| -> usize {
            *node_index.entry(label.to_string()).or_insert_with(|| {
                labels.push(label.to_string());
                labels.len() - 1
            })
        };
        let i = intern(cols[1]);
        let j = intern(cols[2]);
        *edges[t].entry((i, j)).or_insert(0.0) += weight;
        if !directed && i != j {
            *edges[t].entry((j, i)).or_insert(0.0) += weight;
        }
    }

    if tags.is_empty() {
        return Err(Error::EmptyInput);
    }

    let n = labels.len();
    let snapshots = edges
        .into_iter()
        .map(|m| {
            let mut w = Array2::zeros((n, n));
            for ((i, j), weight) in m {
                w[[i, j]] = weight;
            }
            GraphSnapshot::new(w, labels.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    GraphSequence::new(snapshots, Some(tags))
}

/// Writes a sequence back out in the edge-list format read by
/// [`load_edge_list`]. Only nonzero weights are emitted.
pub fn write_edge_list<W: Write>(seq: &GraphSequence, mut out: W) -> Result<()> {
    let labels = seq.labels();
    for (t, snap) in seq.snapshots().iter().enumerate() {
        let tag = seq.tag(t);
        for ((i, j), &w) in snap.weights().indexed_iter() {
            if w > 0.0 {
                writeln!(out, "{tag} {} {} {}", labels[i], labels[j], crate::io::fmt_f64(w))?;
            }
        }
    }
    Ok(())
}

/// Reorders snapshots by time tag: numerically when every tag parses as a
/// number, lexicographically otherwise.
pub fn sort_by_timestamps(seq: &GraphSequence) -> GraphSequence {
    let tags: Vec<String> = (0..seq.len()).map(|t| seq.tag(t)).collect();
    let mut order: Vec<usize> = (0..seq.len()).collect();
    let numeric: Option<Vec<f64>> = tags
        .iter()
        .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    match numeric {
        Some(vals) => order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()),
        None => order.sort_by(|&a, &b| tags[a].cmp(&tags[b])),
    }
    let snapshots = order.iter().map(|&t| seq.snapshots()[t].clone()).collect();
    let tags = order.into_iter().map(|t| tags[t].clone()).collect();
    GraphSequence::new(snapshots, Some(tags)).expect("reordering preserves validity")
}

/// Running elementwise sum: output snapshot `t` accumulates snapshots `0..=t`.
pub fn aggregate_cumulative(seq: &GraphSequence) -> GraphSequence {
    let mut acc: Array2<f64> = Array2::zeros((seq.n(), seq.n()));
    let snapshots = seq
        .snapshots()
        .iter()
        .map(|s| {
            acc += s.weights();
            GraphSnapshot::new(acc.clone(), seq.labels().to_vec()).expect("sum of valid weights")
        })
        .collect();
    GraphSequence::new(snapshots, seq.timestamps().map(|t| t.to_vec()))
        .expect("same shape as input")
}

/// Shifted logarithm `w -> log(1 + w/offset)` applied to nonzero weights;
/// exact zeros (absent edges) are preserved.
pub fn log_transform(seq: &GraphSequence, offset: f64) -> Result<GraphSequence> {
    if !(offset.is_finite() && offset > 0.0) {
        return Err(Error::InvalidConfig("log transform offset must be positive".into()));
    }
    let snapshots = seq
        .snapshots()
        .iter()
        .map(|s| {
            let w = s.weights().mapv(|w| if w == 0.0 { 0.0 } else { (w / offset).ln_1p() });
            GraphSnapshot::new(w, seq.labels().to_vec()).expect("log1p of non-negative is valid")
        })
        .collect();
    GraphSequence::new(snapshots, seq.timestamps().map(|t| t.to_vec()))
}
