//! File formats: factor JSON files, plot-ready CSV exports, and
//! cross-validation reports.
//!
//! JSON is written by hand so key order is fixed and every number carries 17
//! significant digits, which is enough for an exact f64 round trip. Reading
//! goes through serde and accepts both the single-snapshot and the sequence
//! layout.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::Deserialize;

use crate::community::Membership;
use crate::cv::CvReport;
use crate::error::{Error, Result};
use crate::factor::{FactorPair, FactorSequence};
use crate::graph::GraphSequence;

/// 17 significant digits; round trips any finite f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn escape_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

fn json_string_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("\"{}\"", escape_json(s))).collect();
    format!("[{}]", quoted.join(","))
}

fn json_f64_list(items: &[f64]) -> String {
    let vals: Vec<String> = items.iter().map(|&x| fmt_f64(x)).collect();
    format!("[{}]", vals.join(","))
}

fn json_matrix(m: &Array2<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| json_f64_list(&m.row(i).to_vec()))
        .collect();
    format!("[{}]", rows.join(","))
}

/// Single-snapshot factor file:
/// `{"labels": ..., "K": ..., "U": ..., "V": ..., "objective_trace": ...}`.
pub fn write_factor_pair<W: Write>(
    mut out: W,
    labels: &[String],
    pair: &FactorPair,
    objective_trace: &[f64],
) -> Result<()> {
    writeln!(
        out,
        "{{\"labels\":{},\"K\":{},\"U\":{},\"V\":{},\"objective_trace\":{}}}",
        json_string_list(labels),
        pair.k(),
        json_matrix(pair.u()),
        json_matrix(pair.v()),
        json_f64_list(objective_trace),
    )?;
    Ok(())
}

/// Sequence factor file:
/// `{"labels": ..., "K": ..., "timestamps": ..., "factors": [{"t": ..., "U": ..., "V": ...}], "objective_trace": ...}`.
pub fn write_factor_sequence<W: Write>(
    mut out: W,
    labels: &[String],
    timestamps: &[String],
    fs: &FactorSequence,
    objective_trace: &[f64],
) -> Result<()> {
    if timestamps.len() != fs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} timestamps for {} factor pairs",
            timestamps.len(),
            fs.len()
        )));
    }
    let factors: Vec<String> = fs
        .pairs()
        .iter()
        .zip(timestamps)
        .map(|(p, t)| {
            format!(
                "{{\"t\":\"{}\",\"U\":{},\"V\":{}}}",
                escape_json(t),
                json_matrix(p.u()),
                json_matrix(p.v())
            )
        })
        .collect();
    writeln!(
        out,
        "{{\"labels\":{},\"K\":{},\"timestamps\":{},\"factors\":[{}],\"objective_trace\":{}}}",
        json_string_list(labels),
        fs.k(),
        json_string_list(timestamps),
        factors.join(","),
        json_f64_list(objective_trace),
    )?;
    Ok(())
}

/// A factor file read back in, in either layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBundle {
    pub labels: Vec<String>,
    pub timestamps: Vec<String>,
    pub factors: FactorSequence,
    pub objective_trace: Vec<f64>,
}

#[derive(Deserialize)]
struct SequenceEntryFile {
    t: String,
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FactorFile {
    Sequence {
        labels: Vec<String>,
        #[serde(rename = "K")]
        k: usize,
        timestamps: Vec<String>,
        factors: Vec<SequenceEntryFile>,
        objective_trace: Vec<f64>,
    },
    Single {
        labels: Vec<String>,
        #[serde(rename = "K")]
        k: usize,
        #[serde(rename = "U")]
        u: Vec<Vec<f64>>,
        #[serde(rename = "V")]
        v: Vec<Vec<f64>>,
        objective_trace: Vec<f64>,
    },
}

fn matrix_from_rows(rows: Vec<Vec<f64>>, what: &str) -> Result<Array2<f64>> {
    let n = rows.len();
    let k = rows.first().map(Vec::len).unwrap_or(0);
    if n == 0 || k == 0 {
        return Err(Error::MalformedFactorFile(format!("{what} matrix is empty")));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::MalformedFactorFile(format!("{what} rows have uneven lengths")));
    }
    let mut m = Array2::zeros((n, k));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, x) in row.into_iter().enumerate() {
            m[[i, j]] = x;
        }
    }
    Ok(m)
}

/// Reads a factor file in either layout.
pub fn read_factor_bundle<R: Read>(mut source: R) -> Result<FactorBundle> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let parsed: FactorFile =
        serde_json::from_str(&text).map_err(|e| Error::MalformedFactorFile(e.to_string()))?;
    let (labels, k, timestamps, raw_pairs, objective_trace) = match parsed {
        FactorFile::Sequence { labels, k, timestamps, factors, objective_trace } => {
            if factors.is_empty() {
                return Err(Error::MalformedFactorFile("no factor entries".into()));
            }
            if timestamps.len() != factors.len() {
                return Err(Error::MalformedFactorFile(
                    "timestamps and factor entries disagree".into(),
                ));
            }
            for (tag, entry) in timestamps.iter().zip(&factors) {
                if tag != &entry.t {
                    return Err(Error::MalformedFactorFile(format!(
                        "timestamp {tag:?} does not match factor tag {:?}",
                        entry.t
                    )));
                }
            }
            let pairs = factors.into_iter().map(|e| (e.u, e.v)).collect::<Vec<_>>();
            (labels, k, timestamps, pairs, objective_trace)
        }
        FactorFile::Single { labels, k, u, v, objective_trace } => {
            (labels, k, vec!["1".to_string()], vec![(u, v)], objective_trace)
        }
    };
    let pairs = raw_pairs
        .into_iter()
        .map(|(u, v)| {
            let u = matrix_from_rows(u, "U")?;
            let v = matrix_from_rows(v, "V")?;
            if u.ncols() != k {
                return Err(Error::MalformedFactorFile(format!(
                    "U has {} columns but K = {k}",
                    u.ncols()
                )));
            }
            if u.nrows() != labels.len() {
                return Err(Error::MalformedFactorFile(format!(
                    "U has {} rows but {} labels",
                    u.nrows(),
                    labels.len()
                )));
            }
            FactorPair::new(u, v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorBundle {
        labels,
        timestamps,
        factors: FactorSequence::new(pairs)?,
        objective_trace,
    })
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

/// Per-node trajectory data: one row `(node_label, t, sum_k U_t[i,k])` per
/// node and snapshot.
pub fn write_timeplot_csv<W: Write>(
    out: W,
    labels: &[String],
    timestamps: &[String],
    fs: &FactorSequence,
) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["node_label", "t", "u_sum"]).map_err(csv_err)?;
    for (t, pair) in fs.pairs().iter().enumerate() {
        for (i, label) in labels.iter().enumerate() {
            let total: f64 = pair.u().row(i).sum();
            w.write_record([label.as_str(), timestamps[t].as_str(), &fmt_f64(total)])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Column-factor heatmap data: one row `(node_label, t, k, V_t[i,k])` per
/// node, snapshot and community.
pub fn write_heatmap_csv<W: Write>(
    out: W,
    labels: &[String],
    timestamps: &[String],
    fs: &FactorSequence,
) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["node_label", "t", "k", "v_value"]).map_err(csv_err)?;
    for (t, pair) in fs.pairs().iter().enumerate() {
        for (i, label) in labels.iter().enumerate() {
            for k in 0..pair.k() {
                w.write_record([
                    label.as_str(),
                    timestamps[t].as_str(),
                    &(k + 1).to_string(),
                    &fmt_f64(pair.v()[[i, k]]),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Membership export: `(t, node_label, hard_label, soft_1..soft_K)`;
/// unassigned nodes carry the literal `unassigned` and zero soft weights.
pub fn write_membership_csv<W: Write>(
    out: W,
    labels: &[String],
    timestamps: &[String],
    memberships: &[Membership],
) -> Result<()> {
    if memberships.is_empty() {
        return Err(Error::InvalidInput("no memberships to export".into()));
    }
    let k = memberships[0].k();
    let mut w = csv_writer(out);
    let mut header = vec!["t".to_string(), "node_label".to_string(), "hard_label".to_string()];
    header.extend((1..=k).map(|c| format!("soft_{c}")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, m) in memberships.iter().enumerate() {
        for (i, label) in labels.iter().enumerate() {
            let mut record = vec![
                timestamps[t].clone(),
                label.clone(),
                match m.hard[i] {
                    Some(c) => c.to_string(),
                    None => "unassigned".to_string(),
                },
            ];
            record.extend((0..k).map(|c| fmt_f64(m.soft[[i, c]])));
            w.write_record(&record).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Edge-share export over observed edges:
/// `(t, source, target, observed_weight, predicted_weight, share_1..share_K)`.
/// Share fields are empty when the fitted weight is structurally zero.
pub fn write_edge_shares_csv<W: Write>(
    out: W,
    seq: &GraphSequence,
    fs: &FactorSequence,
) -> Result<()> {
    if seq.len() != fs.len() || seq.n() != fs.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} snapshots on {} nodes against {} factor pairs on {} rows",
            seq.len(),
            seq.n(),
            fs.len(),
            fs.n()
        )));
    }
    let k = fs.k();
    let labels = seq.labels();
    let mut w = csv_writer(out);
    let mut header = vec![
        "t".to_string(),
        "source".to_string(),
        "target".to_string(),
        "observed_weight".to_string(),
        "predicted_weight".to_string(),
    ];
    header.extend((1..=k).map(|c| format!("share_{c}")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, (snap, pair)) in seq.snapshots().iter().zip(fs.pairs()).enumerate() {
        let tag = seq.tag(t);
        for ((i, j), &weight) in snap.weights().indexed_iter() {
            if weight <= 0.0 {
                continue;
            }
            let shares = crate::community::edge_decomposition(pair, i, j)?;
            let mut record = vec![
                tag.clone(),
                labels[i].clone(),
                labels[j].clone(),
                fmt_f64(weight),
                fmt_f64(shares.predicted_weight),
            ];
            match shares.shares {
                Some(s) => record.extend(s.iter().map(|&x| fmt_f64(x))),
                None => record.extend(std::iter::repeat(String::new()).take(k)),
            }
            w.write_record(&record).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Ground-truth export for planted sequences: `(t, node_label, true_label)`.
pub fn write_truth_csv<W: Write>(
    out: W,
    labels: &[String],
    timestamps: &[String],
    truth: &[Vec<usize>],
) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["t", "node_label", "true_label"]).map_err(csv_err)?;
    for (t, assignment) in truth.iter().enumerate() {
        for (i, label) in labels.iter().enumerate() {
            w.write_record([timestamps[t].as_str(), label.as_str(), &assignment[i].to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CV report as JSON, mirroring [`CvReport`] with fixed key order.
pub fn write_cv_report_json<W: Write>(mut out: W, report: &CvReport) -> Result<()> {
    let grid: Vec<String> = report.grid.iter().map(usize::to_string).collect();
    let errors: Vec<String> = report
        .errors
        .iter()
        .map(|c| {
            format!(
                "{{\"K\":{},\"fold\":{},\"test_error\":{}}}",
                c.k,
                c.fold,
                fmt_f64(c.test_error)
            )
        })
        .collect();
    let means: Vec<String> = report
        .mean
        .iter()
        .map(|m| format!("{{\"K\":{},\"mean_test_error\":{}}}", m.k, fmt_f64(m.mean_test_error)))
        .collect();
    writeln!(
        out,
        "{{\"grid\":[{}],\"folds\":{},\"errors\":[{}],\"mean\":[{}],\"chosen_K\":{}}}",
        grid.join(","),
        report.folds,
        errors.join(","),
        means.join(","),
        report.chosen_k,
    )?;
    Ok(())
}

/// CV report companion CSV: one row per `(K, fold)`.
pub fn write_cv_report_csv<W: Write>(out: W, report: &CvReport) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["K", "fold", "test_error"]).map_err(csv_err)?;
    for c in &report.errors {
        w.write_record([c.k.to_string(), c.fold.to_string(), fmt_f64(c.test_error)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv::{CvCell, CvMean};
    use ndarray::array;

    fn sample_sequence() -> (Vec<String>, Vec<String>, FactorSequence, Vec<f64>) {
        let labels = vec!["a".into(), "b".into()];
        let timestamps = vec!["d1".into(), "d2".into()];
        let fs = FactorSequence::new(vec![
            FactorPair::new(array![[0.5, 0.0], [1.0, 2.0]], array![[1.5, 0.25], [0.0, 1.0]]).unwrap(),
            FactorPair::new(array![[0.1, 0.2], [0.3, 0.4]], array![[0.5, 0.6], [0.7, 0.8]]).unwrap(),
        ])
        .unwrap();
        let trace = vec![10.0, 1.0, 0.5];
        (labels, timestamps, fs, trace)
    }

    #[test]
    fn seventeen_digit_format_round_trips() {
        for x in [0.5, 1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn sequence_file_round_trips_exactly() {
        let (labels, timestamps, fs, trace) = sample_sequence();
        let mut buf = Vec::new();
        write_factor_sequence(&mut buf, &labels, &timestamps, &fs, &trace).unwrap();
        let bundle = read_factor_bundle(buf.as_slice()).unwrap();
        assert_eq!(bundle.labels, labels);
        assert_eq!(bundle.timestamps, timestamps);
        assert_eq!(bundle.factors, fs);
        assert_eq!(bundle.objective_trace, trace);
    }

    #[test]
    fn single_file_round_trips_exactly() {
        let (labels, _, fs, trace) = sample_sequence();
        let pair = fs.pairs()[0].clone();
        let mut buf = Vec::new();
        write_factor_pair(&mut buf, &labels, &pair, &trace).unwrap();
        let bundle = read_factor_bundle(buf.as_slice()).unwrap();
        assert_eq!(bundle.factors.len(), 1);
        assert_eq!(bundle.factors.pairs()[0], pair);
        assert_eq!(bundle.timestamps, vec!["1".to_string()]);
    }

    #[test]
    fn factor_files_have_stable_key_order() {
        let (labels, timestamps, fs, trace) = sample_sequence();
        let mut buf = Vec::new();
        write_factor_sequence(&mut buf, &labels, &timestamps, &fs, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let positions: Vec<usize> = ["\"labels\"", "\"K\"", "\"timestamps\"", "\"factors\"", "\"objective_trace\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn malformed_factor_files_are_rejected() {
        assert!(read_factor_bundle("not json".as_bytes()).is_err());
        assert!(read_factor_bundle("{\"labels\":[\"a\"],\"K\":1}".as_bytes()).is_err());
        // negative factor entries violate the domain
        let bad = "{\"labels\":[\"a\"],\"K\":1,\"U\":[[-1.0]],\"V\":[[1.0]],\"objective_trace\":[]}";
        assert!(read_factor_bundle(bad.as_bytes()).is_err());
        // ragged rows
        let ragged = "{\"labels\":[\"a\",\"b\"],\"K\":2,\"U\":[[1.0,2.0],[1.0]],\"V\":[[1.0,2.0],[1.0,2.0]],\"objective_trace\":[]}";
        assert!(read_factor_bundle(ragged.as_bytes()).is_err());
    }

    #[test]
    fn timeplot_rows_cover_every_node_and_snapshot() {
        let (labels, timestamps, fs, _) = sample_sequence();
        let mut buf = Vec::new();
        write_timeplot_csv(&mut buf, &labels, &timestamps, &fs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "node_label,t,u_sum");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].starts_with("a,d1,"));
        let u_sum: f64 = rows[0].rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(u_sum, 0.5);
    }

    #[test]
    fn heatmap_rows_carry_community_indices() {
        let (labels, timestamps, fs, _) = sample_sequence();
        let mut buf = Vec::new();
        write_heatmap_csv(&mut buf, &labels, &timestamps, &fs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
        assert!(text.lines().nth(1).unwrap().starts_with("a,d1,1,"));
        assert!(text.lines().nth(2).unwrap().starts_with("a,d1,2,"));
    }

    #[test]
    fn membership_csv_marks_unassigned() {
        let m = crate::community::membership_from_u(&array![[1.0, 1.0], [0.0, 0.0]]).unwrap();
        let mut buf = Vec::new();
        write_membership_csv(&mut buf, &["a".into(), "b".into()], &["1".into()], &[m]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,node_label,hard_label,soft_1,soft_2");
        assert!(text.contains("1,b,unassigned"));
        assert!(text.contains("1,a,1,"));
    }

    #[test]
    fn cv_report_exports_match_the_schema() {
        let report = CvReport {
            grid: vec![1, 2],
            folds: 2,
            errors: vec![
                CvCell { k: 1, fold: 0, test_error: 1.0 },
                CvCell { k: 1, fold: 1, test_error: 3.0 },
                CvCell { k: 2, fold: 0, test_error: 0.5 },
                CvCell { k: 2, fold: 1, test_error: 0.7 },
            ],
            mean: vec![
                CvMean { k: 1, mean_test_error: 2.0 },
                CvMean { k: 2, mean_test_error: 0.6 },
            ],
            chosen_k: 2,
        };
        let mut buf = Vec::new();
        write_cv_report_json(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["chosen_K"], 2);
        assert_eq!(value["folds"], 2);
        assert_eq!(value["errors"].as_array().unwrap().len(), 4);

        let mut buf = Vec::new();
        write_cv_report_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "K,fold,test_error");
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn edge_share_rows_only_cover_observed_edges() {
        use crate::graph::{GraphSequence, GraphSnapshot};
        let w = array![[0.0, 2.0], [0.0, 0.0]];
        let snap = GraphSnapshot::new(w, vec!["a".into(), "b".into()]).unwrap();
        let seq = GraphSequence::new(vec![snap], Some(vec!["d1".into()])).unwrap();
        let fs = FactorSequence::new(vec![FactorPair::new(
            array![[1.0], [0.0]],
            array![[0.0], [2.0]],
        )
        .unwrap()])
        .unwrap();
        let mut buf = Vec::new();
        write_edge_shares_csv(&mut buf, &seq, &fs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "t,source,target,observed_weight,predicted_weight,share_1");
        assert!(lines[1].starts_with("d1,a,b,"));
        assert!(lines[1].ends_with(",1.0000000000000000e0"));
    }
}
