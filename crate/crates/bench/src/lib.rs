//! Shared fixtures for the criterion benchmark suite.

use hedge_core::csbm::{self, CsbmParams};
use hedge_core::MultiRelationGraph;

/// A mid-sized synthetic graph with the bimodal homophily profile the
/// toolkit targets.
pub fn benchmark_graph(n_per_class: usize, seed: u64) -> MultiRelationGraph {
    csbm::generate(&CsbmParams {
        mu0: vec![0.5, 0.0],
        mu1: vec![-0.5, 0.0],
        degree: 10,
        h0: 0.9,
        h1: 0.1,
        n_per_class,
        seed,
    })
    .expect("benchmark graph parameters are valid")
    .graph
}
