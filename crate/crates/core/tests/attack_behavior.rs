//! Attack-level invariants on generated graphs: validity, conservation,
//! and the monotone pressure on class homophily variance.

use hedge_core::attack::{heterophily_attack, random_attack, AttackConfig, AttackKind};
use hedge_core::csbm::{self, CsbmParams};
use hedge_core::homophily::{class_homophily_variance, RelationView};

fn base_graph(seed: u64) -> hedge_core::MultiRelationGraph {
    csbm::generate(&CsbmParams {
        mu0: vec![0.5, 0.0],
        mu1: vec![-0.5, 0.0],
        degree: 10,
        h0: 0.9,
        h1: 0.9,
        n_per_class: 200,
        seed,
    })
    .unwrap()
    .graph
}

#[test]
fn mean_chv_is_non_decreasing_in_attack_ratio() {
    // Ten seeds per ratio; the per-ratio mean CHV after attack must be
    // non-decreasing across the default ratio grid.
    let ratios = [0.0, 0.01, 0.03, 0.05, 0.07, 0.10];
    let mut means = Vec::new();
    for &ratio in &ratios {
        let mut acc = 0.0;
        for seed in 0..10 {
            let graph = base_graph(seed);
            let attacked = if ratio == 0.0 {
                graph
            } else {
                heterophily_attack(
                    &graph,
                    &AttackConfig {
                        kind: AttackKind::Heterophily,
                        target_class: 0,
                        ratio,
                        seed,
                        relation: 0,
                    },
                )
                .unwrap()
                .0
            };
            acc += class_homophily_variance(&attacked, RelationView::Union)
                .unwrap()
                .chv;
        }
        means.push(acc / 10.0);
    }
    for pair in means.windows(2) {
        assert!(
            pair[0] <= pair[1] + 1e-12,
            "CHV means not monotone: {means:?}"
        );
    }
    // The top ratio strictly exceeds the clean graph.
    assert!(means[5] > means[0], "no CHV pressure: {means:?}");
}

#[test]
fn attacked_graphs_always_validate() {
    for seed in 0..5 {
        let graph = base_graph(seed);
        for ratio in [0.01, 0.05, 0.10] {
            let (heter, _) = heterophily_attack(
                &graph,
                &AttackConfig {
                    kind: AttackKind::Heterophily,
                    target_class: 1,
                    ratio,
                    seed,
                    relation: 0,
                },
            )
            .unwrap();
            heter.validate().unwrap();
            let (rand, report) = random_attack(
                &graph,
                &AttackConfig {
                    kind: AttackKind::Random,
                    target_class: 0,
                    ratio,
                    seed,
                    relation: 0,
                },
            )
            .unwrap();
            rand.validate().unwrap();
            assert_eq!(report.edges_before, report.edges_after);
        }
    }
}

#[test]
fn edge_count_is_conserved_when_enough_edges_are_removable() {
    let graph = base_graph(3);
    let (attacked, report) = heterophily_attack(
        &graph,
        &AttackConfig {
            kind: AttackKind::Heterophily,
            target_class: 0,
            ratio: 0.1,
            seed: 11,
            relation: 0,
        },
    )
    .unwrap();
    // At h0 = 0.9 the target class has far more intra-class edges than 10%
    // of the total, so removals fully offset additions.
    assert_eq!(report.removed, report.modifications);
    assert_eq!(report.added, report.modifications);
    assert_eq!(attacked.edge_count(0), graph.edge_count(0));
}

#[test]
fn scarce_removable_edges_grow_the_graph_by_design() {
    // Target class has a single intra-class edge; the attack still adds the
    // full modification budget, growing the edge count.
    let labels: Vec<Option<usize>> = (0..12).map(|v| Some(usize::from(v >= 6))).collect();
    let mut edges = vec![(0, 1)];
    for i in 6..11 {
        edges.push((i, i + 1));
    }
    for i in 0..4 {
        edges.push((i, 6 + i));
    }
    let graph = hedge_core::MultiRelationGraph::build(
        12,
        vec![edges],
        hedge_core::Tensor::zeros(12, 0),
        labels,
        2,
    )
    .unwrap()
    .0;
    let before = graph.edge_count(0);
    let (attacked, report) = heterophily_attack(
        &graph,
        &AttackConfig {
            kind: AttackKind::Heterophily,
            target_class: 0,
            ratio: 0.5,
            seed: 2,
            relation: 0,
        },
    )
    .unwrap();
    assert_eq!(report.modifications, before / 2);
    assert_eq!(report.removed, 1);
    assert_eq!(report.added, report.modifications);
    assert_eq!(
        attacked.edge_count(0),
        before - report.removed + report.added
    );
}
