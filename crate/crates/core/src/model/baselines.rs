//! Reference classifiers sharing the autodiff core: degree-normalized graph
//! convolution (with self-loops), mean-aggregation over node-plus-neighbors,
//! and an edge-blind multilayer perceptron.

use serde::{Deserialize, Serialize};

use super::params::{xavier, ParamSet};
use crate::error::{Error, Result};
use crate::graph::MultiRelationGraph;
use crate::rng;
use crate::tensor::{Tape, Tensor, TensorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Gcn,
    Sage,
    Mlp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub layers: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub epochs: usize,
    pub downsample_ratio: f64,
    pub eval_every: usize,
    /// Squared-norm regularizer weight.
    pub beta: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            kind: BaselineKind::Gcn,
            layers: 2,
            hidden_dim: 16,
            learning_rate: 0.01,
            seed: 0,
            epochs: 200,
            downsample_ratio: 0.5,
            eval_every: 10,
            beta: 1e-3,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::validation("layers must be >= 1"));
        }
        if self.hidden_dim == 0 {
            return Err(Error::validation("hidden_dim must be >= 1"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::validation(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0 < self.downsample_ratio && self.downsample_ratio <= 1.0) {
            return Err(Error::validation(format!(
                "downsample_ratio must be in (0, 1], got {}",
                self.downsample_ratio
            )));
        }
        if self.epochs == 0 || self.eval_every == 0 {
            return Err(Error::validation("epochs and eval_every must be >= 1"));
        }
        if self.beta < 0.0 {
            return Err(Error::validation("beta must be nonnegative"));
        }
        Ok(())
    }
}

/// A baseline bound to one graph: the constant aggregation matrix (over the
/// union of relations) and parameter shapes.
pub struct BaselineModel<'a> {
    pub cfg: BaselineConfig,
    graph: &'a MultiRelationGraph,
    num_classes: usize,
    /// None for the MLP.
    aggregation: Option<Tensor>,
    init: ParamSet,
}

impl<'a> BaselineModel<'a> {
    pub fn new(graph: &'a MultiRelationGraph, cfg: BaselineConfig) -> Result<Self> {
        cfg.validate()?;
        if graph.label_arity() < 2 {
            return Err(Error::validation("training needs at least two classes"));
        }
        let num_classes = graph.label_arity();
        let union = graph.union_neighbors();
        let aggregation = match cfg.kind {
            BaselineKind::Gcn => Some(gcn_matrix(&union)),
            BaselineKind::Sage => Some(mean_self_matrix(&union)),
            BaselineKind::Mlp => None,
        };
        let init = init_params(&cfg, graph.feature_dim(), num_classes);
        Ok(BaselineModel {
            cfg,
            graph,
            num_classes,
            aggregation,
            init,
        })
    }

    pub fn graph(&self) -> &MultiRelationGraph {
        self.graph
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn init_params(&self) -> ParamSet {
        self.init.clone()
    }

    /// Forward pass to class probabilities; when `subset` is nonempty a
    /// cross-entropy (+ regularizer) loss node is built over it.
    pub fn forward(
        &self,
        tape: &mut Tape,
        param_ids: &[TensorId],
        subset: &[usize],
    ) -> Result<(Option<TensorId>, Tensor)> {
        let n = self.graph.num_nodes();
        let k = self.num_classes;
        let mut h = tape.constant(self.graph.features().clone());
        let agg = self.aggregation.as_ref().map(|m| tape.constant(m.clone()));
        // Layer weights occupy the first `layers` slots (MLP interleaves
        // biases), then the linear classifier head.
        let mut cursor = 0;
        for _ in 0..self.cfg.layers {
            let lin = match agg {
                Some(agg) => {
                    let msg = tape.matmul(agg, h)?;
                    tape.matmul(msg, param_ids[cursor])?
                }
                None => {
                    let pre = tape.matmul(h, param_ids[cursor])?;
                    cursor += 1;
                    tape.add_row_broadcast(pre, param_ids[cursor])?
                }
            };
            cursor += 1;
            h = tape.relu(lin);
        }
        let logits_lin = tape.matmul(h, param_ids[cursor])?;
        let logits = tape.add_row_broadcast(logits_lin, param_ids[cursor + 1])?;
        let probs = tape.softmax_rows(logits);
        let probs_values = tape.value(probs).clone();

        let mut loss = None;
        if !subset.is_empty() {
            let mut ce_mask = Tensor::zeros(n, k);
            for &v in subset {
                let label = self.graph.label(v).ok_or_else(|| {
                    Error::validation(format!("training subset contains unlabeled node {v}"))
                })?;
                ce_mask.set(v, label, 1.0);
            }
            let log_probs = tape.log(probs);
            let masked = tape.masked_sum(log_probs, ce_mask)?;
            let ce = tape.scale(masked, -1.0);
            let mut reg: Option<TensorId> = None;
            for &id in param_ids {
                let sq = tape.square(id);
                let s = tape.sum_all(sq);
                reg = Some(match reg {
                    None => s,
                    Some(acc) => tape.add(acc, s)?,
                });
            }
            let weighted_reg = tape.scale(reg.unwrap(), self.cfg.beta);
            loss = Some(tape.add(ce, weighted_reg)?);
        }
        Ok((loss, probs_values))
    }
}

fn init_params(cfg: &BaselineConfig, feature_dim: usize, num_classes: usize) -> ParamSet {
    let mut rng = rng::stream(cfg.seed, 1);
    let mut params = ParamSet::new();
    let h = cfg.hidden_dim;
    let mut width = feature_dim;
    for layer in 0..cfg.layers {
        params.add(format!("layer{layer}.w"), xavier(width, h, 1.0, &mut rng));
        if cfg.kind == BaselineKind::Mlp {
            params.add(format!("layer{layer}.b"), Tensor::zeros(1, h));
        }
        width = h;
    }
    params.add("clf.w", xavier(width, num_classes, 1.0, &mut rng));
    params.add("clf.b", Tensor::zeros(1, num_classes));
    params
}

/// `D^{-1/2} (A + I) D^{-1/2}` over the union adjacency.
fn gcn_matrix(union: &[Vec<usize>]) -> Tensor {
    let n = union.len();
    let inv_sqrt: Vec<f64> = union
        .iter()
        .map(|nbrs| 1.0 / ((nbrs.len() + 1) as f64).sqrt())
        .collect();
    let mut m = Tensor::zeros(n, n);
    for v in 0..n {
        m.set(v, v, inv_sqrt[v] * inv_sqrt[v]);
        for &u in &union[v] {
            m.set(v, u, inv_sqrt[v] * inv_sqrt[u]);
        }
    }
    m
}

/// Row-normalized mean over `{v} ∪ N(v)` on the union adjacency.
fn mean_self_matrix(union: &[Vec<usize>]) -> Tensor {
    let n = union.len();
    let mut m = Tensor::zeros(n, n);
    for v in 0..n {
        let inv = 1.0 / (union[v].len() + 1) as f64;
        m.set(v, v, inv);
        for &u in &union[v] {
            m.set(v, u, inv);
        }
    }
    m
}
