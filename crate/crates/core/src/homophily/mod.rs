//! Node homophily, per-class means, class homophily variance, and companions.
//!
//! A node's homophily is the fraction of its labeled neighbors that share its
//! label. Unlabeled endpoints are excluded from both numerator and
//! denominator, and a labeled node with no labeled neighbor has no homophily
//! value at all (it is skipped by every aggregate rather than counted as 0).
//!
//! Class homophily variance (CHV) is the population variance of the per-class
//! mean homophily values: each class contributes once, regardless of size.

mod kde;

pub use kde::{weighted_density_curve, weighted_kde, DensityCurve};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::MultiRelationGraph;

/// Which adjacency the metrics walk: the deduplicated union of all relations
/// (the default, one number per graph) or a single relation for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationView {
    Union,
    Single(usize),
}

/// Full per-graph homophily readout.
#[derive(Debug, Clone, Serialize)]
pub struct HomophilyProfile {
    /// H(v) per node; `None` for unlabeled nodes and nodes with no labeled
    /// neighbor.
    pub per_node: Vec<Option<f64>>,
    /// Mean homophily per class, over nodes with a defined value.
    pub per_class_mean: Vec<f64>,
    /// Unweighted mean of the class means.
    pub class_mean_average: f64,
    /// Population variance of the class means.
    pub chv: f64,
    /// In-class variance of H(v) per class.
    pub in_class_var: Vec<f64>,
    pub mean_in_class_var: f64,
    /// Inverse-class-frequency weighted mean of H(v).
    pub weighted_mean: f64,
}

/// Materializes the neighbor lists selected by `view`.
pub fn neighbor_view(graph: &MultiRelationGraph, view: RelationView) -> Result<Vec<Vec<usize>>> {
    match view {
        RelationView::Union => Ok(graph.union_neighbors()),
        RelationView::Single(r) => {
            if r >= graph.num_relations() {
                return Err(Error::validation(format!(
                    "relation {r} out of range for {} relations",
                    graph.num_relations()
                )));
            }
            Ok((0..graph.num_nodes())
                .map(|v| graph.neighbors(r, v).to_vec())
                .collect())
        }
    }
}

fn homophily_value(neighbors: &[usize], labels: &[Option<usize>], own_label: usize) -> Option<f64> {
    let mut labeled = 0usize;
    let mut same = 0usize;
    for &u in neighbors {
        if let Some(l) = labels[u] {
            labeled += 1;
            if l == own_label {
                same += 1;
            }
        }
    }
    if labeled == 0 {
        None
    } else {
        Some(same as f64 / labeled as f64)
    }
}

/// H(v) for one labeled node, or `None` when no labeled neighbor exists.
/// Querying an unlabeled node is an error.
pub fn node_homophily(
    graph: &MultiRelationGraph,
    view: RelationView,
    node: usize,
) -> Result<Option<f64>> {
    let Some(own) = graph.label(node) else {
        return Err(Error::validation(format!(
            "node {node} is unlabeled; homophily is undefined"
        )));
    };
    let neighbors = match view {
        RelationView::Union => {
            let mut merged: Vec<usize> = (0..graph.num_relations())
                .flat_map(|r| graph.neighbors(r, node).iter().copied())
                .collect();
            merged.sort_unstable();
            merged.dedup();
            merged
        }
        RelationView::Single(r) => {
            if r >= graph.num_relations() {
                return Err(Error::validation(format!(
                    "relation {r} out of range for {} relations",
                    graph.num_relations()
                )));
            }
            graph.neighbors(r, node).to_vec()
        }
    };
    Ok(homophily_value(&neighbors, graph.labels(), own))
}

/// Computes the full profile from explicit neighbor lists. This is the one
/// engine behind the graph-based entry points; generators with directed
/// out-neighborhood views call it directly.
pub fn profile_from_neighbors(
    neighbors: &[Vec<usize>],
    labels: &[Option<usize>],
    label_arity: usize,
) -> Result<HomophilyProfile> {
    if neighbors.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} neighbor lists for {} labels",
            neighbors.len(),
            labels.len()
        )));
    }
    let per_node: Vec<Option<f64>> = neighbors
        .iter()
        .zip(labels)
        .map(|(nbrs, label)| label.and_then(|own| homophily_value(nbrs, labels, own)))
        .collect();

    let mut sums = vec![0.0; label_arity];
    let mut counts = vec![0usize; label_arity];
    for (v, h) in per_node.iter().enumerate() {
        if let (Some(l), Some(h)) = (labels[v], h) {
            sums[l] += h;
            counts[l] += 1;
        }
    }
    for (class, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::validation(format!(
                "class {class} has no node with defined homophily"
            )));
        }
    }
    let per_class_mean: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let class_mean_average = per_class_mean.iter().sum::<f64>() / label_arity as f64;
    let chv = per_class_mean
        .iter()
        .map(|m| (m - class_mean_average) * (m - class_mean_average))
        .sum::<f64>()
        / label_arity as f64;

    let mut var_sums = vec![0.0; label_arity];
    for (v, h) in per_node.iter().enumerate() {
        if let (Some(l), Some(h)) = (labels[v], h) {
            let d = h - per_class_mean[l];
            var_sums[l] += d * d;
        }
    }
    let in_class_var: Vec<f64> = var_sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let mean_in_class_var = in_class_var.iter().sum::<f64>() / label_arity as f64;

    let weighted_mean = weighted_mean_from(&per_node, labels, &counts)?;

    Ok(HomophilyProfile {
        per_node,
        per_class_mean,
        class_mean_average,
        chv,
        in_class_var,
        mean_in_class_var,
        weighted_mean,
    })
}

/// Inverse-class-frequency weighted mean of the defined homophily values.
/// The class fraction p_i is taken over nodes with defined homophily.
fn weighted_mean_from(
    per_node: &[Option<f64>],
    labels: &[Option<usize>],
    counts: &[usize],
) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::validation("no node has defined homophily"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, h) in per_node.iter().enumerate() {
        if let (Some(l), Some(h)) = (labels[v], h) {
            let p = counts[l] as f64 / total as f64;
            let w = 1.0 / p;
            num += w * h;
            den += w;
        }
    }
    Ok(num / den)
}

/// Per-class means, CHV, in-class variances, and the weighted mean for the
/// selected relation view. Requires at least two classes, each with at least
/// one node of defined homophily.
pub fn class_homophily_variance(
    graph: &MultiRelationGraph,
    view: RelationView,
) -> Result<HomophilyProfile> {
    if graph.label_arity() < 2 {
        return Err(Error::validation(format!(
            "class homophily variance needs >= 2 classes, graph has {}",
            graph.label_arity()
        )));
    }
    let neighbors = neighbor_view(graph, view)?;
    profile_from_neighbors(&neighbors, graph.labels(), graph.label_arity())
}

/// Just the weighted homophily mean (same preconditions as the profile).
pub fn weighted_mean_homophily(graph: &MultiRelationGraph, view: RelationView) -> Result<f64> {
    Ok(class_homophily_variance(graph, view)?.weighted_mean)
}
