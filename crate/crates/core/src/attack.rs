//! Seeded edge perturbations that raise class homophily variance.
//!
//! The heterophily attack works on the upper-triangular edge set of one
//! relation: it computes `floor(edges * ratio)` modifications, removes up to
//! that many uniformly chosen intra-target-class edges, then adds exactly
//! that many new cross-class edges (one endpoint in the target class, one
//! outside it) by rejection sampling. When fewer intra-class edges were
//! removable than modifications requested, the edge count grows; the report
//! carries both counts so callers can see it.
//!
//! The random attack deletes a uniform fraction of edges and adds the same
//! number of pairs that were non-edges in the *original* graph, so deleted
//! edges are never silently reinstated.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MultiRelationGraph;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Heterophily,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// Class whose intra-class edges are removed (ignored for `Random`).
    #[serde(default)]
    pub target_class: usize,
    /// Fraction of the relation's edges to modify, in [0, 1].
    pub ratio: f64,
    pub seed: u64,
    /// Which relation to perturb; other relations pass through unchanged.
    #[serde(default)]
    pub relation: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AttackReport {
    pub modifications: usize,
    pub removed: usize,
    pub added: usize,
    pub edges_before: usize,
    pub edges_after: usize,
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

fn validate_common(graph: &MultiRelationGraph, cfg: &AttackConfig) -> Result<()> {
    if !(0.0..=1.0).contains(&cfg.ratio) {
        return Err(Error::validation(format!(
            "attack ratio {} outside [0, 1]",
            cfg.ratio
        )));
    }
    if cfg.relation >= graph.num_relations() {
        return Err(Error::validation(format!(
            "relation {} out of range for {} relations",
            cfg.relation,
            graph.num_relations()
        )));
    }
    Ok(())
}

/// Removes intra-target-class edges and adds cross-class edges, keeping the
/// graph simple and symmetric.
pub fn heterophily_attack(
    graph: &MultiRelationGraph,
    cfg: &AttackConfig,
) -> Result<(MultiRelationGraph, AttackReport)> {
    validate_common(graph, cfg)?;
    if cfg.target_class >= graph.label_arity() {
        return Err(Error::validation(format!(
            "target class {} out of range for {} classes",
            cfg.target_class,
            graph.label_arity()
        )));
    }
    let in_target: Vec<usize> = (0..graph.num_nodes())
        .filter(|&v| graph.label(v) == Some(cfg.target_class))
        .collect();
    let outside: Vec<usize> = (0..graph.num_nodes())
        .filter(|&v| graph.label(v) != Some(cfg.target_class))
        .collect();
    if in_target.is_empty() || outside.is_empty() {
        return Err(Error::validation(format!(
            "heterophily attack needs nodes inside and outside class {}",
            cfg.target_class
        )));
    }

    let mut rng = rng::seeded(cfg.seed);
    let edges = graph.edges(cfg.relation);
    let edges_before = edges.len();
    let modifications = (edges_before as f64 * cfg.ratio).floor() as usize;

    let mut edge_set: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let removable: Vec<(usize, usize)> = edges
        .iter()
        .copied()
        .filter(|&(i, j)| {
            graph.label(i) == Some(cfg.target_class) && graph.label(j) == Some(cfg.target_class)
        })
        .collect();
    let remove_count = modifications.min(removable.len());
    for &edge in &rng::sample_without_replacement(&removable, remove_count, &mut rng) {
        edge_set.remove(&edge);
    }

    // Rejection-sample cross-class additions; budget caps pathological
    // density instead of looping forever.
    let budget = graph.num_nodes() * graph.num_nodes();
    let mut added = 0usize;
    while added < modifications {
        let mut attempts = 0usize;
        loop {
            attempts += 1;
            if attempts > budget {
                return Err(Error::validation(format!(
                    "heterophily attack: could not place cross-class edge {} of {modifications} \
                     after {budget} attempts",
                    added + 1
                )));
            }
            let i = in_target[rng.random_range(0..in_target.len())];
            let j = outside[rng.random_range(0..outside.len())];
            let e = ordered(i, j);
            if !edge_set.contains(&e) {
                edge_set.insert(e);
                break;
            }
        }
        added += 1;
    }

    let mut new_edges: Vec<(usize, usize)> = edge_set.into_iter().collect();
    new_edges.sort_unstable();
    let edges_after = new_edges.len();
    let attacked = graph.with_relation_replaced(cfg.relation, new_edges)?;
    Ok((
        attacked,
        AttackReport {
            modifications,
            removed: remove_count,
            added,
            edges_before,
            edges_after,
        },
    ))
}

/// Deletes `floor(ratio * |E|)` uniform edges and adds the same number of
/// uniform original-graph non-edges. Edge count is preserved.
pub fn random_attack(
    graph: &MultiRelationGraph,
    cfg: &AttackConfig,
) -> Result<(MultiRelationGraph, AttackReport)> {
    validate_common(graph, cfg)?;
    let mut rng = rng::seeded(cfg.seed);
    let edges = graph.edges(cfg.relation);
    let edges_before = edges.len();
    let modifications = (edges_before as f64 * cfg.ratio).floor() as usize;

    let n = graph.num_nodes();
    let possible_pairs = n * (n - 1) / 2;
    if modifications > possible_pairs - edges_before {
        return Err(Error::validation(format!(
            "random attack: graph has only {} non-edges, cannot add {modifications}",
            possible_pairs - edges_before
        )));
    }

    let original: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let mut edge_set = original.clone();
    for &edge in &rng::sample_without_replacement(&edges, modifications, &mut rng) {
        edge_set.remove(&edge);
    }

    let budget = n * n;
    let mut added = 0usize;
    while added < modifications {
        let mut attempts = 0usize;
        loop {
            attempts += 1;
            if attempts > budget {
                return Err(Error::validation(format!(
                    "random attack: could not place non-edge {} of {modifications} \
                     after {budget} attempts",
                    added + 1
                )));
            }
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let e = ordered(i, j);
            // Candidates are non-edges of the original graph, so deleted
            // edges are never reinstated.
            if !original.contains(&e) && !edge_set.contains(&e) {
                edge_set.insert(e);
                break;
            }
        }
        added += 1;
    }

    let mut new_edges: Vec<(usize, usize)> = edge_set.into_iter().collect();
    new_edges.sort_unstable();
    let edges_after = new_edges.len();
    let attacked = graph.with_relation_replaced(cfg.relation, new_edges)?;
    Ok((
        attacked,
        AttackReport {
            modifications,
            removed: modifications,
            added,
            edges_before,
            edges_after,
        },
    ))
}

/// Dispatch on the configured attack kind.
pub fn run_attack(
    graph: &MultiRelationGraph,
    cfg: &AttackConfig,
) -> Result<(MultiRelationGraph, AttackReport)> {
    match cfg.kind {
        AttackKind::Heterophily => heterophily_attack(graph, cfg),
        AttackKind::Random => random_attack(graph, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn graph_of(
        labels: Vec<Option<usize>>,
        edges: Vec<(usize, usize)>,
        k: usize,
    ) -> MultiRelationGraph {
        let n = labels.len();
        MultiRelationGraph::build(n, vec![edges], Tensor::zeros(n, 0), labels, k)
            .unwrap()
            .0
    }

    fn cfg(kind: AttackKind, target: usize, ratio: f64, seed: u64) -> AttackConfig {
        AttackConfig {
            kind,
            target_class: target,
            ratio,
            seed,
            relation: 0,
        }
    }

    #[test]
    fn four_node_worked_example_is_forced() {
        // labels [0,0,1,1], edges {(0,1),(2,3),(0,2)}, target 0, ratio 1/3:
        // one modification; the only removable edge is (0,1); one cross edge
        // is added; the edge count stays 3.
        let g = graph_of(
            vec![Some(0), Some(0), Some(1), Some(1)],
            vec![(0, 1), (2, 3), (0, 2)],
            2,
        );
        for seed in 0..20 {
            let (attacked, report) =
                heterophily_attack(&g, &cfg(AttackKind::Heterophily, 0, 1.0 / 3.0, seed)).unwrap();
            assert_eq!(report.modifications, 1);
            assert_eq!(report.removed, 1);
            assert_eq!(report.added, 1);
            assert!(
                !attacked.has_edge(0, 0, 1),
                "intra-class edge kept, seed {seed}"
            );
            assert_eq!(attacked.edge_count(0), 3);
            let new: Vec<(usize, usize)> = attacked
                .edges(0)
                .into_iter()
                .filter(|e| !g.edges(0).contains(e))
                .collect();
            assert_eq!(new.len(), 1);
            let (i, j) = new[0];
            let in_target = usize::from(attacked.label(i) == Some(0))
                + usize::from(attacked.label(j) == Some(0));
            assert_eq!(in_target, 1, "added edge ({i},{j}) must be cross-class");
            attacked.validate().unwrap();
        }
    }

    #[test]
    fn zero_ratio_changes_nothing() {
        let g = graph_of(
            vec![Some(0), Some(0), Some(1), Some(1)],
            vec![(0, 1), (2, 3), (0, 2)],
            2,
        );
        let (a, _) = heterophily_attack(&g, &cfg(AttackKind::Heterophily, 0, 0.0, 5)).unwrap();
        assert_eq!(a.edges(0), g.edges(0));
        let (a, _) = random_attack(&g, &cfg(AttackKind::Random, 0, 0.0, 5)).unwrap();
        assert_eq!(a.edges(0), g.edges(0));
    }

    #[test]
    fn complete_graph_rejects_random_attack() {
        // K4 has no non-edges to add.
        let g = graph_of(
            vec![Some(0); 4],
            vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            1,
        );
        let err = random_attack(&g, &cfg(AttackKind::Random, 0, 0.5, 1)).unwrap_err();
        assert!(err.to_string().contains("non-edge"), "{err}");
    }

    #[test]
    fn path_graph_random_attack_conserves_edges() {
        let g = graph_of(vec![Some(0); 4], vec![(0, 1), (1, 2), (2, 3)], 1);
        let (attacked, report) =
            random_attack(&g, &cfg(AttackKind::Random, 0, 1.0 / 3.0, 7)).unwrap();
        assert_eq!(report.removed, 1);
        assert_eq!(report.added, 1);
        assert_eq!(attacked.edge_count(0), 3);
        attacked.validate().unwrap();
    }

    #[test]
    fn removed_edges_are_intra_class_added_are_cross() {
        let labels: Vec<Option<usize>> = (0..30).map(|v| Some(v % 2)).collect();
        let mut edges = Vec::new();
        for i in 0..30usize {
            for j in (i + 1)..30 {
                if (i + j) % 3 == 0 {
                    edges.push((i, j));
                }
            }
        }
        let g = graph_of(labels, edges, 2);
        let before: std::collections::HashSet<_> = g.edges(0).into_iter().collect();
        let (attacked, report) =
            heterophily_attack(&g, &cfg(AttackKind::Heterophily, 0, 0.2, 9)).unwrap();
        let after: std::collections::HashSet<_> = attacked.edges(0).into_iter().collect();
        for &(i, j) in before.difference(&after) {
            assert_eq!(attacked.label(i), Some(0));
            assert_eq!(attacked.label(j), Some(0));
        }
        for &(i, j) in after.difference(&before) {
            let in_target = usize::from(attacked.label(i) == Some(0))
                + usize::from(attacked.label(j) == Some(0));
            assert_eq!(in_target, 1, "added edge ({i},{j}) must be cross-class");
        }
        assert_eq!(report.added, report.modifications);
        attacked.validate().unwrap();
    }

    #[test]
    fn determinism_per_seed() {
        let labels: Vec<Option<usize>> = (0..20).map(|v| Some(v % 2)).collect();
        let edges: Vec<(usize, usize)> = (0..19).map(|i| (i, i + 1)).collect();
        let g = graph_of(labels, edges, 2);
        let c = cfg(AttackKind::Heterophily, 0, 0.3, 123);
        let (a, _) = heterophily_attack(&g, &c).unwrap();
        let (b, _) = heterophily_attack(&g, &c).unwrap();
        assert_eq!(a.edges(0), b.edges(0));
    }

    #[test]
    fn bad_ratio_is_rejected() {
        let g = graph_of(vec![Some(0), Some(1)], vec![(0, 1)], 2);
        let err = heterophily_attack(&g, &cfg(AttackKind::Heterophily, 0, 1.5, 0)).unwrap_err();
        assert!(err.to_string().contains("ratio"), "{err}");
    }
}
