//! Homophily analytics for graph anomaly detection at desk scale:
//! class-homophily-variance metrics, a synthetic two-class block-model
//! generator with closed-form oracles, seeded edge-perturbation attacks, an
//! edge-generating attention GNN with companion baselines, and the ranking
//! metrics and sweeps used to evaluate them — all over a small dense
//! reverse-mode autodiff core.

// Numeric kernels (eigensolver, tape rules) index in lockstep across
// several buffers; range loops are clearer than zipped iterator chains there.
#![allow(clippy::needless_range_loop)]

pub mod attack;
pub mod csbm;
pub mod eigen;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod homophily;
pub mod model;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use eval::MetricsReport;
pub use graph::{load_graph, make_split, save_graph, GraphFormat, MultiRelationGraph, SplitMask};
pub use tensor::{Tape, Tensor, TensorId};
