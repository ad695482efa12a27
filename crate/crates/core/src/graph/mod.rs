//! Canonical multi-relation graph representation, validation, and splits.
//!
//! Adjacency is stored as per-node sorted neighbor lists so iteration order
//! and symmetry checks are deterministic. Construction symmetrizes input
//! edges (undirected semantics), deduplicates, and drops self-loops.

mod io;

pub use io::{load_graph, save_graph, GraphFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Node features, labels, and a list of symmetric simple adjacency
/// structures over the same node set.
#[derive(Clone)]
pub struct MultiRelationGraph {
    num_nodes: usize,
    relations: Vec<Vec<Vec<usize>>>,
    features: Tensor,
    labels: Vec<Option<usize>>,
    label_arity: usize,
}

/// Counts of input irregularities fixed up during construction.
#[derive(Debug, Default, Clone, Copy, Serialize)]
pub struct GraphBuildReport {
    pub self_loops_dropped: usize,
    pub duplicate_edges_merged: usize,
}

impl MultiRelationGraph {
    /// Builds a validated graph from raw edge lists. Each `(i, j)` pair is
    /// stored in both directions; duplicates collapse; self-loops are dropped
    /// and counted in the report.
    pub fn build(
        num_nodes: usize,
        relation_edges: Vec<Vec<(usize, usize)>>,
        features: Tensor,
        labels: Vec<Option<usize>>,
        label_arity: usize,
    ) -> Result<(Self, GraphBuildReport)> {
        if features.rows() != num_nodes {
            return Err(Error::validation(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                num_nodes
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::validation(format!(
                "label vector has {} entries for {} nodes",
                labels.len(),
                num_nodes
            )));
        }
        for (v, label) in labels.iter().enumerate() {
            if let Some(l) = label {
                if *l >= label_arity {
                    return Err(Error::validation(format!(
                        "node {v} has label {l} but label arity is {label_arity}"
                    )));
                }
            }
        }
        let mut report = GraphBuildReport::default();
        let mut relations = Vec::with_capacity(relation_edges.len());
        for (r, edges) in relation_edges.into_iter().enumerate() {
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
            for (i, j) in edges {
                if i >= num_nodes || j >= num_nodes {
                    return Err(Error::validation(format!(
                        "relation {r}: edge ({i}, {j}) references node {} but the graph has {num_nodes} nodes",
                        i.max(j)
                    )));
                }
                if i == j {
                    report.self_loops_dropped += 1;
                    continue;
                }
                adj[i].push(j);
                adj[j].push(i);
            }
            for list in &mut adj {
                list.sort_unstable();
                let before = list.len();
                list.dedup();
                report.duplicate_edges_merged += before - list.len();
            }
            relations.push(adj);
        }
        // Each merged duplicate was counted once per endpoint.
        report.duplicate_edges_merged /= 2;
        let graph = MultiRelationGraph {
            num_nodes,
            relations,
            features,
            labels,
            label_arity,
        };
        graph.validate()?;
        Ok((graph, report))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label_arity(&self) -> usize {
        self.label_arity
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    pub fn neighbors(&self, relation: usize, v: usize) -> &[usize] {
        &self.relations[relation][v]
    }

    /// Neighbor-list length of `v` under `relation`.
    pub fn degree(&self, v: usize, relation: usize) -> usize {
        assert!(v < self.num_nodes, "node {v} out of range");
        assert!(
            relation < self.relations.len(),
            "relation {relation} out of range"
        );
        self.relations[relation][v].len()
    }

    /// Number of undirected edges in `relation`.
    pub fn edge_count(&self, relation: usize) -> usize {
        self.relations[relation]
            .iter()
            .map(|l| l.len())
            .sum::<usize>()
            / 2
    }

    /// Undirected edges as `(i, j)` with `i < j`, ascending.
    pub fn edges(&self, relation: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count(relation));
        for (i, list) in self.relations[relation].iter().enumerate() {
            for &j in list {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, relation: usize, i: usize, j: usize) -> bool {
        self.relations[relation][i].binary_search(&j).is_ok()
    }

    /// Deduplicated union of neighbor lists across all relations.
    pub fn union_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.num_nodes];
        for adj in &self.relations {
            for (v, list) in adj.iter().enumerate() {
                out[v].extend_from_slice(list);
            }
        }
        for list in &mut out {
            list.sort_unstable();
            list.dedup();
        }
        out
    }

    /// Returns a copy with relation `r` replaced by the given edge list
    /// (re-symmetrized and re-validated).
    pub fn with_relation_replaced(
        &self,
        relation: usize,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if relation >= self.relations.len() {
            return Err(Error::validation(format!(
                "relation {relation} out of range for {} relations",
                self.relations.len()
            )));
        }
        let mut relation_edges: Vec<Vec<(usize, usize)>> = self
            .relations
            .iter()
            .map(|adj| {
                adj.iter()
                    .enumerate()
                    .flat_map(|(i, list)| {
                        list.iter().filter(move |&&j| i < j).map(move |&j| (i, j))
                    })
                    .collect()
            })
            .collect();
        relation_edges[relation] = edges;
        let (graph, _) = MultiRelationGraph::build(
            self.num_nodes,
            relation_edges,
            self.features.clone(),
            self.labels.clone(),
            self.label_arity,
        )?;
        Ok(graph)
    }

    /// Labeled node ids grouped by class.
    pub fn labeled_nodes_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.label_arity];
        for (v, label) in self.labels.iter().enumerate() {
            if let Some(l) = label {
                by_class[*l].push(v);
            }
        }
        by_class
    }

    /// Checks every structural invariant: symmetry, sortedness, no
    /// self-loops or duplicates, index bounds, shape agreement.
    pub fn validate(&self) -> Result<()> {
        if self.features.rows() != self.num_nodes {
            return Err(Error::validation("feature row count mismatch"));
        }
        if self.labels.len() != self.num_nodes {
            return Err(Error::validation("label count mismatch"));
        }
        for (r, adj) in self.relations.iter().enumerate() {
            if adj.len() != self.num_nodes {
                return Err(Error::validation(format!(
                    "relation {r}: adjacency has {} rows for {} nodes",
                    adj.len(),
                    self.num_nodes
                )));
            }
            for (v, list) in adj.iter().enumerate() {
                let mut prev: Option<usize> = None;
                for &u in list {
                    if u >= self.num_nodes {
                        return Err(Error::validation(format!(
                            "relation {r}: node {v} lists neighbor {u} >= {}",
                            self.num_nodes
                        )));
                    }
                    if u == v {
                        return Err(Error::validation(format!(
                            "relation {r}: node {v} has a self-loop"
                        )));
                    }
                    if let Some(p) = prev {
                        if u <= p {
                            return Err(Error::validation(format!(
                                "relation {r}: node {v} neighbor list not strictly sorted"
                            )));
                        }
                    }
                    prev = Some(u);
                    if adj[u].binary_search(&v).is_err() {
                        return Err(Error::validation(format!(
                            "relation {r}: edge ({v}, {u}) is not symmetric"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for MultiRelationGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiRelationGraph")
            .field("num_nodes", &self.num_nodes)
            .field("num_relations", &self.relations.len())
            .field("feature_dim", &self.features.cols())
            .field("label_arity", &self.label_arity)
            .finish()
    }
}

/// Disjoint stratified train/val/test node sets over labeled nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitMask {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub ratios: (f64, f64, f64),
}

impl SplitMask {
    pub fn is_train(&self, v: usize) -> bool {
        self.train.binary_search(&v).is_ok()
    }
}

/// Stratified split: within each class the requested ratios are hit to
/// within one node (floor + largest remainder). Deterministic per seed.
pub fn make_split(
    graph: &MultiRelationGraph,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<SplitMask> {
    let (r_train, r_val, r_test) = ratios;
    for (name, r) in [("train", r_train), ("val", r_val), ("test", r_test)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::validation(format!(
                "split ratio {name} = {r} outside [0, 1]"
            )));
        }
    }
    if r_train + r_val + r_test > 1.0 + 1e-9 {
        return Err(Error::validation(format!(
            "split ratios sum to {} > 1",
            r_train + r_val + r_test
        )));
    }
    let by_class = graph.labeled_nodes_by_class();
    let mut rng = rng::seeded(seed);
    let mut sets: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (class, members) in by_class.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::validation(format!(
                "class {class} has no labeled nodes to split"
            )));
        }
        let m = members.len();
        let targets_f = [r_train * m as f64, r_val * m as f64, r_test * m as f64];
        let mut counts: [usize; 3] = [
            targets_f[0].floor() as usize,
            targets_f[1].floor() as usize,
            targets_f[2].floor() as usize,
        ];
        let total_f: f64 = targets_f.iter().sum();
        let assigned: usize = counts.iter().sum();
        let leftover = (total_f + 1e-9).floor() as usize - assigned;
        let mut remainders: Vec<(usize, f64)> = (0..3)
            .map(|s| (s, targets_f[s] - counts[s] as f64))
            .collect();
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for k in 0..leftover {
            counts[remainders[k % 3].0] += 1;
        }
        for (s, (count, ratio)) in counts.iter().zip([r_train, r_val, r_test]).enumerate() {
            if ratio > 0.0 && *count == 0 {
                let name = ["train", "val", "test"][s];
                return Err(Error::validation(format!(
                    "class {class} has only {m} labeled nodes; the {name} split would be empty"
                )));
            }
        }
        let mut shuffled = members.clone();
        rng::shuffle(&mut shuffled, &mut rng);
        let mut cursor = 0;
        for (s, &count) in counts.iter().enumerate() {
            sets[s].extend_from_slice(&shuffled[cursor..cursor + count]);
            cursor += count;
        }
    }
    let [mut train, mut val, mut test] = sets;
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitMask {
        train,
        val,
        test,
        seed,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled_graph(
        n: usize,
        labels: Vec<Option<usize>>,
        edges: Vec<(usize, usize)>,
    ) -> MultiRelationGraph {
        MultiRelationGraph::build(n, vec![edges], Tensor::zeros(n, 0), labels, 2)
            .unwrap()
            .0
    }

    #[test]
    fn build_symmetrizes_and_dedups() {
        // "0 1" and "1 0" listed separately collapse to one undirected edge.
        let (g, report) = MultiRelationGraph::build(
            2,
            vec![vec![(0, 1), (1, 0)]],
            Tensor::zeros(2, 0),
            vec![None, None],
            0,
        )
        .unwrap();
        assert_eq!(g.degree(0, 0), 1);
        assert_eq!(g.degree(1, 0), 1);
        assert_eq!(g.edge_count(0), 1);
        assert_eq!(report.duplicate_edges_merged, 1);
    }

    #[test]
    fn self_loops_are_dropped_and_counted() {
        let (g, report) = MultiRelationGraph::build(
            3,
            vec![vec![(0, 0), (1, 2)]],
            Tensor::zeros(3, 0),
            vec![None, None, None],
            0,
        )
        .unwrap();
        assert_eq!(report.self_loops_dropped, 1);
        assert_eq!(g.edge_count(0), 1);
    }

    #[test]
    fn out_of_range_edge_is_rejected_by_name() {
        let err = MultiRelationGraph::build(
            3,
            vec![vec![(0, 5)]],
            Tensor::zeros(3, 0),
            vec![None, None, None],
            0,
        )
        .unwrap_err();
        assert!(err.to_string().contains('5'), "{err}");
    }

    #[test]
    fn degrees_on_standard_shapes() {
        let iso = labeled_graph(1, vec![Some(0)], vec![]);
        assert_eq!(iso.degree(0, 0), 0);

        let triangle = labeled_graph(3, vec![Some(0); 3], vec![(0, 1), (1, 2), (0, 2)]);
        assert_eq!(triangle.degree(1, 0), 2);

        let star = labeled_graph(
            6,
            vec![Some(0); 6],
            vec![(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)],
        );
        assert_eq!(star.degree(0, 0), 5);
    }

    #[test]
    fn handshake_lemma_holds() {
        let g = labeled_graph(
            5,
            vec![Some(0); 5],
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)],
        );
        let degree_sum: usize = (0..5).map(|v| g.degree(v, 0)).sum();
        assert_eq!(degree_sum, 2 * g.edge_count(0));
    }

    #[test]
    fn split_is_stratified_and_exact() {
        // 100 labeled nodes, 50/50 over two classes.
        let labels: Vec<Option<usize>> = (0..100).map(|v| Some(v % 2)).collect();
        let g = labeled_graph(100, labels, vec![]);
        let split = make_split(&g, (0.4, 0.3, 0.3), 7).unwrap();
        assert_eq!(split.train.len(), 40);
        assert_eq!(split.val.len(), 30);
        assert_eq!(split.test.len(), 30);
        for set in [&split.train, &split.val, &split.test] {
            let c0 = set.iter().filter(|&&v| v % 2 == 0).count();
            let c1 = set.len() - c0;
            assert_eq!(c0, c1);
        }
        // Disjointness.
        let mut all: Vec<usize> = split
            .train
            .iter()
            .chain(&split.val)
            .chain(&split.test)
            .copied()
            .collect();
        all.sort_unstable();
        let before = all.len();
        all.dedup();
        assert_eq!(before, all.len());
    }

    #[test]
    fn full_train_ratio_takes_all_labeled() {
        let labels: Vec<Option<usize>> = (0..10).map(|v| Some(v % 2)).collect();
        let g = labeled_graph(10, labels, vec![]);
        let split = make_split(&g, (1.0, 0.0, 0.0), 3).unwrap();
        assert_eq!(split.train.len(), 10);
        assert!(split.val.is_empty());
        assert!(split.test.is_empty());
    }

    #[test]
    fn same_seed_same_split() {
        let labels: Vec<Option<usize>> = (0..60).map(|v| Some(v % 3)).collect();
        let g = MultiRelationGraph::build(60, vec![vec![]], Tensor::zeros(60, 0), labels, 3)
            .unwrap()
            .0;
        let a = make_split(&g, (0.5, 0.25, 0.25), 11).unwrap();
        let b = make_split(&g, (0.5, 0.25, 0.25), 11).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn undersized_class_is_reported() {
        let labels = vec![Some(0), Some(0), Some(0), Some(1)];
        let g = labeled_graph(4, labels, vec![]);
        let err = make_split(&g, (0.4, 0.3, 0.3), 1).unwrap_err();
        assert!(err.to_string().contains("class 1"), "{err}");
    }

    #[test]
    fn unlabeled_nodes_stay_out_of_splits() {
        let labels = vec![Some(0), None, Some(1), None, Some(0), Some(1)];
        let g = labeled_graph(6, labels, vec![]);
        let split = make_split(&g, (1.0, 0.0, 0.0), 5).unwrap();
        assert_eq!(split.train, vec![0, 2, 4, 5]);
    }
}
