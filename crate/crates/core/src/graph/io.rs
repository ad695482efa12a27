//! Graph file formats.
//!
//! Two inputs are accepted:
//!
//! - `edge-tsv`: UTF-8 lines `i<TAB>j`, `#` starts a comment. Node count is
//!   inferred as `max index + 1`; the result has one relation, no features
//!   (width 0), and no labels.
//! - `json`: an envelope `{"n", "f", "K", "relations": [path...],
//!   "features": path|null, "labels": path|null}` with sidecar files
//!   relative to the envelope. Relation sidecars are edge-tsv; the features
//!   sidecar holds one tab-separated row of `f` reals per node; the labels
//!   sidecar holds one integer per line with `-1` meaning unlabeled.
//!
//! `save_graph` writes the envelope plus sidecars next to it using the
//! canonical ordering (edges `i < j` ascending), so save/load round-trips.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GraphBuildReport, MultiRelationGraph};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    EdgeTsv,
    Json,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    n: usize,
    f: usize,
    #[serde(rename = "K")]
    k: usize,
    relations: Vec<String>,
    features: Option<String>,
    labels: Option<String>,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Parses an edge-tsv file into raw `(i, j)` pairs.
fn read_edge_tsv(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("expected 'i<TAB>j', got {raw:?}"),
            ));
        };
        if parts.next().is_some() {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("trailing fields in {raw:?}"),
            ));
        }
        let i: usize = a
            .parse()
            .map_err(|_| parse_err(path, lineno + 1, format!("bad node index {a:?}")))?;
        let j: usize = b
            .parse()
            .map_err(|_| parse_err(path, lineno + 1, format!("bad node index {b:?}")))?;
        edges.push((i, j));
    }
    Ok(edges)
}

fn read_features(path: &Path, n: usize, f: usize) -> Result<Tensor> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let row =
            row.map_err(|_| parse_err(path, lineno + 1, format!("bad feature row {raw:?}")))?;
        if row.len() != f {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("feature row has {} values, expected {f}", row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::validation(format!(
            "feature file {} has {} rows for {n} nodes",
            path.display(),
            rows.len()
        )));
    }
    Ok(Tensor::from_rows(&rows))
}

fn read_labels(path: &Path, n: usize, k: usize) -> Result<Vec<Option<usize>>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut labels = Vec::with_capacity(n);
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: i64 = line
            .parse()
            .map_err(|_| parse_err(path, lineno + 1, format!("bad label {raw:?}")))?;
        if v == -1 {
            labels.push(None);
        } else if v < 0 || v as usize >= k {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("label {v} outside 0..{k} (-1 = unlabeled)"),
            ));
        } else {
            labels.push(Some(v as usize));
        }
    }
    if labels.len() != n {
        return Err(Error::validation(format!(
            "label file {} has {} entries for {n} nodes",
            path.display(),
            labels.len()
        )));
    }
    Ok(labels)
}

/// Loads and validates a graph from either supported format.
pub fn load_graph(
    path: impl AsRef<Path>,
    format: GraphFormat,
) -> Result<(MultiRelationGraph, GraphBuildReport)> {
    let path = path.as_ref();
    match format {
        GraphFormat::EdgeTsv => {
            let edges = read_edge_tsv(path)?;
            let n = edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
            MultiRelationGraph::build(n, vec![edges], Tensor::zeros(n, 0), vec![None; n], 0)
        }
        GraphFormat::Json => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let envelope: Envelope = serde_json::from_str(&text)
                .map_err(|e| parse_err(path, e.line(), e.to_string()))?;
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            let mut relation_edges = Vec::with_capacity(envelope.relations.len());
            for rel_path in &envelope.relations {
                relation_edges.push(read_edge_tsv(&dir.join(rel_path))?);
            }
            let features = match &envelope.features {
                Some(p) => read_features(&dir.join(p), envelope.n, envelope.f)?,
                None => {
                    if envelope.f != 0 {
                        return Err(Error::validation(format!(
                            "envelope declares f={} but no feature file",
                            envelope.f
                        )));
                    }
                    Tensor::zeros(envelope.n, 0)
                }
            };
            let labels = match &envelope.labels {
                Some(p) => read_labels(&dir.join(p), envelope.n, envelope.k)?,
                None => vec![None; envelope.n],
            };
            MultiRelationGraph::build(envelope.n, relation_edges, features, labels, envelope.k)
        }
    }
}

/// Writes the JSON envelope at `json_path` and the sidecar files next to it:
/// `<stem>.rel<r>.tsv`, `<stem>.features.tsv`, `<stem>.labels.txt`.
pub fn save_graph(graph: &MultiRelationGraph, json_path: impl AsRef<Path>) -> Result<()> {
    let json_path = json_path.as_ref();
    let dir = json_path.parent().unwrap_or_else(|| Path::new("."));
    let stem = json_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::validation(format!("bad output path {}", json_path.display())))?;

    let mut relation_names = Vec::new();
    for r in 0..graph.num_relations() {
        let name = format!("{stem}.rel{r}.tsv");
        let mut body = String::new();
        for (i, j) in graph.edges(r) {
            body.push_str(&format!("{i}\t{j}\n"));
        }
        write_file(&dir.join(&name), &body)?;
        relation_names.push(name);
    }

    let features_name = if graph.feature_dim() > 0 {
        let name = format!("{stem}.features.tsv");
        let mut body = String::new();
        for v in 0..graph.num_nodes() {
            let row: Vec<String> = graph.features().row(v).iter().map(f64::to_string).collect();
            body.push_str(&row.join("\t"));
            body.push('\n');
        }
        write_file(&dir.join(&name), &body)?;
        Some(name)
    } else {
        None
    };

    let labels_name = if graph.labels().iter().any(Option::is_some) {
        let name = format!("{stem}.labels.txt");
        let mut body = String::new();
        for label in graph.labels() {
            match label {
                Some(l) => body.push_str(&format!("{l}\n")),
                None => body.push_str("-1\n"),
            }
        }
        write_file(&dir.join(&name), &body)?;
        Some(name)
    } else {
        None
    };

    let envelope = Envelope {
        n: graph.num_nodes(),
        f: graph.feature_dim(),
        k: graph.label_arity(),
        relations: relation_names,
        features: features_name,
        labels: labels_name,
    };
    let body =
        serde_json::to_string_pretty(&envelope).map_err(|e| Error::validation(e.to_string()))?;
    write_file(json_path, &(body + "\n"))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| io_err(path, e))
}
