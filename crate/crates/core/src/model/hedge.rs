//! The edge-generating attention model.
//!
//! Each layer computes dense scaled dot-product attention over all node
//! pairs, converts the (scaled, clamped) attention coefficients into
//! per-pair Bernoulli edge samples through a two-way Gumbel-Softmax
//! relaxation, runs a degree-normalized aggregation over the sampled
//! adjacency, aggregates the original relations, adds the attention-weighted
//! sum of all nodes, and fuses the three branches through layer norm and a
//! feed-forward block. One attention map per layer is shared across
//! relations.
//!
//! Training uses hard 0/1 edges forward with straight-through gradients;
//! gradient checking runs the soft relaxation end to end; evaluation decodes
//! edges deterministically by keeping each node's top attention targets up
//! to its expected sampled out-degree.

use rand_chacha::ChaCha8Rng;

use super::params::{xavier, ParamSet};
use super::pe;
use super::{Aggregator, HedgeConfig, MAX_DENSE_NODES};
use crate::error::{Error, Result};
use crate::graph::{MultiRelationGraph, SplitMask};
use crate::rng;
use crate::tensor::{gumbel_noise, Tape, Tensor, TensorId};

/// Clamp band for the per-pair edge probability `lambda * a_ij`.
pub const EDGE_PROB_EPS: f64 = 1e-6;

/// How the sampled adjacency enters the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    /// Hard 0/1 samples forward, gradients through the soft relaxation.
    SampledStraightThrough,
    /// Soft relaxation end to end (finite-difference checking).
    SoftRelaxation,
    /// Deterministic expected-degree decode, no noise (evaluation).
    MapDecode,
}

/// Per-layer Gumbel noise for one forward pass.
#[derive(Clone)]
pub struct LayerNoise {
    pub g1: Tensor,
    pub g2: Tensor,
}

/// Draws the per-layer noise a sampled forward pass consumes.
pub fn draw_noise(layers: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<LayerNoise> {
    (0..layers)
        .map(|_| LayerNoise {
            g1: gumbel_noise(n, n, rng),
            g2: gumbel_noise(n, n, rng),
        })
        .collect()
}

/// Everything a forward pass exposes.
pub struct ForwardOutput {
    /// Total loss node; present when a training subset was given.
    pub loss: Option<TensorId>,
    /// Cross-entropy part of the loss value.
    pub cross_entropy: f64,
    /// Cross-class attention penalty value (unweighted).
    pub penalty: f64,
    /// Class probabilities, `n x K`.
    pub probs: Tensor,
    /// Attention coefficients per layer.
    pub attention: Vec<Tensor>,
    /// Sampled (or decoded) adjacency per layer, as forward values.
    pub generated_adj: Vec<Tensor>,
    /// Final node representations.
    pub embeddings: Tensor,
    /// Entries of `lambda * a` the clamp moved this pass.
    pub clamped: usize,
}

struct LayerIdx {
    w_query: usize,
    w_key: usize,
    w_value: usize,
    w_gen: usize,
    w_orig: Vec<usize>,
    ln_gain: usize,
    ln_bias: usize,
    ffn_w1: usize,
    ffn_b1: usize,
    ffn_w2: usize,
    ffn_b2: usize,
}

struct ParamIdx {
    label_embed: usize,
    layers: Vec<LayerIdx>,
    clf_hidden_w: usize,
    clf_hidden_b: usize,
    clf_out_w: usize,
    clf_out_b: usize,
}

/// The model bound to one graph and split: precomputed encodings, constant
/// aggregation matrices, and the penalty mask.
pub struct HedgeModel<'a> {
    pub cfg: HedgeConfig,
    graph: &'a MultiRelationGraph,
    split: &'a SplitMask,
    num_classes: usize,
    input_width: usize,
    /// Concat(X, degree encoding, Laplacian encoding), label rows added on
    /// the tape so the embedding table stays learnable.
    base_encoding: Tensor,
    /// Per relation, the constant aggregation matrix for the original-graph
    /// branch; empty in edgeless mode.
    original_agg: Vec<Tensor>,
    /// 1 at ordered train pairs (i, j) with differing labels.
    penalty_mask: Tensor,
    idx: ParamIdx,
    init: ParamSet,
}

impl<'a> HedgeModel<'a> {
    pub fn new(
        graph: &'a MultiRelationGraph,
        cfg: HedgeConfig,
        split: &'a SplitMask,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = graph.num_nodes();
        if n > MAX_DENSE_NODES {
            return Err(Error::validation(format!(
                "graph has {n} nodes; the dense attention path supports at most {MAX_DENSE_NODES}"
            )));
        }
        if graph.label_arity() < 2 {
            return Err(Error::validation("training needs at least two classes"));
        }
        if graph.num_relations() == 0 {
            return Err(Error::validation("graph has no relations"));
        }
        let num_classes = graph.label_arity();
        let r = graph.num_relations();
        let input_width = graph.feature_dim() + r + r * cfg.k_pe;

        let degree = pe::degree_pe(graph);
        let mut sign_rng = rng::stream(cfg.seed, 2);
        let laplacian = pe::laplacian_pe(graph, cfg.k_pe, &mut sign_rng)?;
        let zero_label = Tensor::zeros(n, input_width);
        let base_encoding = pe::fuse_pe(graph.features(), &degree, &laplacian, &zero_label)?;

        let original_agg = if cfg.edgeless {
            Vec::new()
        } else {
            (0..r)
                .map(|rel| match cfg.original_aggregator {
                    Aggregator::Sage => mean_with_self_matrix(graph, rel),
                    Aggregator::Gcn => symmetric_normalized_matrix(graph, rel),
                })
                .collect()
        };

        let mut penalty_mask = Tensor::zeros(n, n);
        for &i in &split.train {
            for &j in &split.train {
                if i == j {
                    continue;
                }
                if let (Some(a), Some(b)) = (graph.label(i), graph.label(j)) {
                    if a != b {
                        penalty_mask.set(i, j, 1.0);
                    }
                }
            }
        }

        let (init, idx) = init_params(&cfg, input_width, r, num_classes);
        Ok(HedgeModel {
            cfg,
            graph,
            split,
            num_classes,
            input_width,
            base_encoding,
            original_agg,
            penalty_mask,
            idx,
            init,
        })
    }

    pub fn graph(&self) -> &MultiRelationGraph {
        self.graph
    }

    pub fn split(&self) -> &SplitMask {
        self.split
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    /// Fresh deterministic parameters for this model shape.
    pub fn init_params(&self) -> ParamSet {
        self.init.clone()
    }

    /// One forward pass. `subset` is the epoch's training subset; when empty
    /// no loss is built (pure evaluation). `noise` must hold one entry per
    /// layer for the sampled and soft modes and may be empty for MapDecode.
    pub fn forward(
        &self,
        tape: &mut Tape,
        param_ids: &[TensorId],
        subset: &[usize],
        noise: &[LayerNoise],
        mode: EdgeMode,
    ) -> Result<ForwardOutput> {
        let n = self.graph.num_nodes();
        let k = self.num_classes;
        if mode != EdgeMode::MapDecode && noise.len() != self.cfg.layers {
            return Err(Error::validation(format!(
                "{} noise layers supplied for {} model layers",
                noise.len(),
                self.cfg.layers
            )));
        }

        // Input encoding: constant concat plus learnable label rows.
        let codes = pe::label_codes(self.graph, self.split, subset);
        let base = tape.constant(self.base_encoding.clone());
        let label_rows = tape.gather_rows(param_ids[self.idx.label_embed], &codes)?;
        let mut h = tape.add(base, label_rows)?;

        let agg_consts: Vec<TensorId> = self
            .original_agg
            .iter()
            .map(|m| tape.constant(m.clone()))
            .collect();

        let mut attention = Vec::with_capacity(self.cfg.layers);
        let mut generated_adj = Vec::with_capacity(self.cfg.layers);
        let mut attention_ids = Vec::with_capacity(self.cfg.layers);
        let mut clamped = 0usize;

        for (layer, lidx) in self.idx.layers.iter().enumerate() {
            let scale = 1.0 / (self.cfg.hidden_dim as f64).sqrt();
            let q = tape.matmul(h, param_ids[lidx.w_query])?;
            let key = tape.matmul(h, param_ids[lidx.w_key])?;
            let scores_raw = tape.matmul_nt(q, key)?;
            let scores = tape.scale(scores_raw, scale);
            let attn = tape.softmax_rows(scores);
            attention.push(tape.value(attn).clone());
            attention_ids.push(attn);

            let adj = self.sample_adjacency(tape, attn, layer, noise, mode, &mut clamped)?;
            generated_adj.push(tape.value(adj).clone());

            let norm_adj = degree_normalized(tape, adj)?;
            let gen_msg = tape.matmul(norm_adj, h)?;
            let gen_lin = tape.matmul(gen_msg, param_ids[lidx.w_gen])?;
            let h_generated = tape.relu(gen_lin);

            let value = tape.matmul(h, param_ids[lidx.w_value])?;
            let h_attention = tape.matmul(attn, value)?;

            // Fuse the branches, averaging over relations; the generated and
            // attention branches are shared across relations.
            let mut fused: Option<TensorId> = None;
            let relation_count = if self.cfg.edgeless {
                1
            } else {
                self.graph.num_relations()
            };
            for rel in 0..relation_count {
                let cat = if self.cfg.edgeless {
                    tape.concat_cols(h_generated, h_attention)?
                } else {
                    let msg = tape.matmul(agg_consts[rel], h)?;
                    let lin = tape.matmul(msg, param_ids[lidx.w_orig[rel]])?;
                    let h_original = tape.relu(lin);
                    let left = tape.concat_cols(h_generated, h_original)?;
                    tape.concat_cols(left, h_attention)?
                };
                fused = Some(match fused {
                    None => cat,
                    Some(acc) => tape.add(acc, cat)?,
                });
            }
            let mean = tape.scale(fused.unwrap(), 1.0 / relation_count as f64);
            let normed = tape.layer_norm_rows(mean);
            let gained = tape.mul_row_broadcast(normed, param_ids[lidx.ln_gain])?;
            let shifted = tape.add_row_broadcast(gained, param_ids[lidx.ln_bias])?;
            let ffn_mid_lin = tape.matmul(shifted, param_ids[lidx.ffn_w1])?;
            let ffn_mid_aff = tape.add_row_broadcast(ffn_mid_lin, param_ids[lidx.ffn_b1])?;
            let ffn_mid = tape.relu(ffn_mid_aff);
            let ffn_out_lin = tape.matmul(ffn_mid, param_ids[lidx.ffn_w2])?;
            h = tape.add_row_broadcast(ffn_out_lin, param_ids[lidx.ffn_b2])?;
        }

        let embeddings = tape.value(h).clone();

        let clf_mid_lin = tape.matmul(h, param_ids[self.idx.clf_hidden_w])?;
        let clf_mid_aff = tape.add_row_broadcast(clf_mid_lin, param_ids[self.idx.clf_hidden_b])?;
        let clf_mid = tape.relu(clf_mid_aff);
        let logits_lin = tape.matmul(clf_mid, param_ids[self.idx.clf_out_w])?;
        let logits = tape.add_row_broadcast(logits_lin, param_ids[self.idx.clf_out_b])?;
        let probs = tape.softmax_rows(logits);
        let probs_values = tape.value(probs).clone();

        let mut loss = None;
        let mut cross_entropy = 0.0;
        let mut penalty = 0.0;
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
            cross_entropy = tape.value(ce).item();

            let mut penalty_id: Option<TensorId> = None;
            for &attn in &attention_ids {
                let sq = tape.square(attn);
                let p = tape.masked_sum(sq, self.penalty_mask.clone())?;
                penalty_id = Some(match penalty_id {
                    None => p,
                    Some(acc) => tape.add(acc, p)?,
                });
            }
            let penalty_id = penalty_id.unwrap();
            penalty = tape.value(penalty_id).item();

            let mut reg: Option<TensorId> = None;
            for &id in param_ids {
                let sq = tape.square(id);
                let s = tape.sum_all(sq);
                reg = Some(match reg {
                    None => s,
                    Some(acc) => tape.add(acc, s)?,
                });
            }
            let weighted_penalty = tape.scale(penalty_id, self.cfg.alpha);
            let weighted_reg = tape.scale(reg.unwrap(), self.cfg.beta);
            let partial = tape.add(ce, weighted_penalty)?;
            loss = Some(tape.add(partial, weighted_reg)?);
        }

        Ok(ForwardOutput {
            loss,
            cross_entropy,
            penalty,
            probs: probs_values,
            attention,
            generated_adj,
            embeddings,
            clamped,
        })
    }

    /// Edge sampling for one layer: returns the adjacency node (symmetric,
    /// 0/1 or soft in [0, 1], zero diagonal).
    fn sample_adjacency(
        &self,
        tape: &mut Tape,
        attn: TensorId,
        layer: usize,
        noise: &[LayerNoise],
        mode: EdgeMode,
        clamped: &mut usize,
    ) -> Result<TensorId> {
        let lambda = self.cfg.lambda_edge;
        if mode == EdgeMode::MapDecode {
            let a = tape.value(attn);
            let hard = map_decode_adjacency(a, lambda);
            return Ok(tape.constant(hard));
        }

        let lam_a_raw = tape.scale(attn, lambda);
        *clamped += tape.count_outside(lam_a_raw, EDGE_PROB_EPS, 1.0 - EDGE_PROB_EPS);
        let lam_a = tape.clamp(lam_a_raw, EDGE_PROB_EPS, 1.0 - EDGE_PROB_EPS);
        let neg = tape.scale(lam_a, -1.0);
        let one_minus = tape.add_scalar(neg, 1.0);
        let log_p = tape.log(lam_a);
        let log_q = tape.log(one_minus);
        let logit = tape.sub(log_p, log_q)?;
        let noise_diff = noise[layer].g1.zip_map(&noise[layer].g2, |a, b| a - b)?;
        let noise_const = tape.constant(noise_diff);
        let pre_tau = tape.add(logit, noise_const)?;
        let z = tape.scale(pre_tau, 1.0 / self.cfg.tau);
        // Softmax of two logits at temperature tau, first component.
        let p_soft = tape.sigmoid(z);

        let p_t = tape.transpose(p_soft);
        let sym_sum = tape.add(p_soft, p_t)?;
        let capped = tape.clamp(sym_sum, f64::NEG_INFINITY, 1.0);
        let soft_adj = tape.zero_diagonal(capped)?;

        match mode {
            EdgeMode::SoftRelaxation => Ok(soft_adj),
            EdgeMode::SampledStraightThrough => {
                // Hard decision: edge iff L1 > L2, equivalently p > 1/2
                // (the temperature preserves the sign).
                let p_values = tape.value(p_soft).clone();
                let hard = hard_adjacency_from(&p_values, 0.5);
                tape.straight_through(soft_adj, hard)
            }
            EdgeMode::MapDecode => unreachable!(),
        }
    }
}

/// The soft edge indicator for one pair: the first component of a two-way
/// Gumbel-Softmax at temperature `tau` over logits `ln(p) + g1` and
/// `ln(1-p) + g2`, which reduces to a sigmoid of the logit difference.
pub fn esgs_soft(edge_prob: f64, g1: f64, g2: f64, tau: f64) -> f64 {
    let l1 = edge_prob.ln() + g1;
    let l2 = (1.0 - edge_prob).ln() + g2;
    1.0 / (1.0 + (-((l1 - l2) / tau)).exp())
}

/// Hard symmetric adjacency `min(e + e^T, 1)` with zero diagonal from
/// per-pair indicator values `indicator_ij = value_ij > threshold`.
fn hard_adjacency_from(values: &Tensor, threshold: f64) -> Tensor {
    let n = values.rows();
    let mut out = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && (values.get(i, j) > threshold || values.get(j, i) > threshold) {
                out.set(i, j, 1.0);
            }
        }
    }
    out
}

/// Deterministic evaluation decode with the trained edge budget: per row,
/// the clamped edge probabilities `p_ij = clamp(lambda * a_ij)` are summed
/// to the expected out-degree `m_i = round(sum_j p_ij)` and the `m_i`
/// highest-probability targets are kept (ties by ascending index), then the
/// directed picks are symmetrized. A plain per-pair threshold at 1/2 fails
/// whenever the attention is diffuse - every probability sits below 1/2 and
/// the decoded graph is empty even though the sampler draws `m_i` edges per
/// node - so the decode matches the budget instead.
pub fn map_decode_adjacency(attention: &Tensor, lambda: f64) -> Tensor {
    let n = attention.rows();
    let mut out = Tensor::zeros(n, n);
    for i in 0..n {
        let mut probs: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                (
                    j,
                    (lambda * attention.get(i, j)).clamp(EDGE_PROB_EPS, 1.0 - EDGE_PROB_EPS),
                )
            })
            .collect();
        let budget: f64 = probs.iter().map(|&(_, p)| p).sum();
        let m = (budget.round() as usize).min(n - 1);
        probs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for &(j, _) in probs.iter().take(m) {
            out.set(i, j, 1.0);
            out.set(j, i, 1.0);
        }
    }
    out
}

/// `D^{-1/2} A D^{-1/2}` on the tape, with weighted degrees taken from the
/// adjacency itself; isolated rows (degree at the rsqrt guard or below)
/// stay all-zero.
pub fn degree_normalized(tape: &mut Tape, adj: TensorId) -> Result<TensorId> {
    let deg = tape.row_sum(adj);
    let inv_sqrt = tape.rsqrt_guard(deg);
    let col_scaled = tape.mul_col_broadcast(adj, inv_sqrt)?;
    let inv_sqrt_row = tape.transpose(inv_sqrt);
    tape.mul_row_broadcast(col_scaled, inv_sqrt_row)
}

/// Undirected edge list of a hard adjacency.
pub fn adjacency_edges(adj: &Tensor) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..adj.rows() {
        for j in (i + 1)..adj.cols() {
            if adj.get(i, j) > 0.5 {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Row-normalized mean over `{v} ∪ N_r(v)` as a dense constant matrix.
fn mean_with_self_matrix(graph: &MultiRelationGraph, relation: usize) -> Tensor {
    let n = graph.num_nodes();
    let mut m = Tensor::zeros(n, n);
    for v in 0..n {
        let inv = 1.0 / (graph.degree(v, relation) + 1) as f64;
        m.set(v, v, inv);
        for &u in graph.neighbors(relation, v) {
            m.set(v, u, inv);
        }
    }
    m
}

/// `D^{-1/2} A D^{-1/2}` without self-loops; isolated rows stay zero.
fn symmetric_normalized_matrix(graph: &MultiRelationGraph, relation: usize) -> Tensor {
    let n = graph.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| {
            let d = graph.degree(v, relation);
            if d == 0 {
                0.0
            } else {
                1.0 / (d as f64).sqrt()
            }
        })
        .collect();
    let mut m = Tensor::zeros(n, n);
    for v in 0..n {
        for &u in graph.neighbors(relation, v) {
            m.set(v, u, inv_sqrt[v] * inv_sqrt[u]);
        }
    }
    m
}

fn init_params(
    cfg: &HedgeConfig,
    input_width: usize,
    relations: usize,
    num_classes: usize,
) -> (ParamSet, ParamIdx) {
    let mut rng = rng::stream(cfg.seed, 1);
    let mut params = ParamSet::new();
    let h = cfg.hidden_dim;
    let label_embed = params.add(
        "label_embed",
        xavier(num_classes + 1, input_width, 1.0, &mut rng),
    );
    let mut layers = Vec::with_capacity(cfg.layers);
    for layer in 0..cfg.layers {
        let w_in = if layer == 0 { input_width } else { h };
        let cat_width = if cfg.edgeless { 2 * h } else { 3 * h };
        // Damped query/key init keeps initial attention logits small enough
        // that the row softmax starts near uniform.
        let w_query = params.add(
            format!("layer{layer}.w_query"),
            xavier(w_in, h, 0.1, &mut rng),
        );
        let w_key = params.add(
            format!("layer{layer}.w_key"),
            xavier(w_in, h, 0.1, &mut rng),
        );
        let w_value = params.add(
            format!("layer{layer}.w_value"),
            xavier(w_in, h, 1.0, &mut rng),
        );
        let w_gen = params.add(
            format!("layer{layer}.w_gen"),
            xavier(w_in, h, 1.0, &mut rng),
        );
        let w_orig = if cfg.edgeless {
            Vec::new()
        } else {
            (0..relations)
                .map(|r| {
                    params.add(
                        format!("layer{layer}.w_orig{r}"),
                        xavier(w_in, h, 1.0, &mut rng),
                    )
                })
                .collect()
        };
        let ln_gain = params.add(
            format!("layer{layer}.ln_gain"),
            Tensor::filled(1, cat_width, 1.0),
        );
        let ln_bias = params.add(format!("layer{layer}.ln_bias"), Tensor::zeros(1, cat_width));
        let ffn_w1 = params.add(
            format!("layer{layer}.ffn_w1"),
            xavier(cat_width, 2 * h, 1.0, &mut rng),
        );
        let ffn_b1 = params.add(format!("layer{layer}.ffn_b1"), Tensor::zeros(1, 2 * h));
        let ffn_w2 = params.add(
            format!("layer{layer}.ffn_w2"),
            xavier(2 * h, h, 1.0, &mut rng),
        );
        let ffn_b2 = params.add(format!("layer{layer}.ffn_b2"), Tensor::zeros(1, h));
        layers.push(LayerIdx {
            w_query,
            w_key,
            w_value,
            w_gen,
            w_orig,
            ln_gain,
            ln_bias,
            ffn_w1,
            ffn_b1,
            ffn_w2,
            ffn_b2,
        });
    }
    let clf_hidden_w = params.add("clf.hidden_w", xavier(h, h, 1.0, &mut rng));
    let clf_hidden_b = params.add("clf.hidden_b", Tensor::zeros(1, h));
    let clf_out_w = params.add("clf.out_w", xavier(h, num_classes, 1.0, &mut rng));
    let clf_out_b = params.add("clf.out_b", Tensor::zeros(1, num_classes));
    (
        params,
        ParamIdx {
            label_embed,
            layers,
            clf_hidden_w,
            clf_hidden_b,
            clf_out_w,
            clf_out_b,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::make_split;

    fn tiny_graph() -> MultiRelationGraph {
        let labels: Vec<Option<usize>> = (0..8).map(|v| Some(v % 2)).collect();
        let mut features = Tensor::zeros(8, 2);
        for v in 0..8 {
            features.set(v, 0, if v % 2 == 0 { 1.0 } else { -1.0 });
            features.set(v, 1, v as f64 / 8.0);
        }
        MultiRelationGraph::build(
            8,
            vec![vec![(0, 2), (2, 4), (4, 6), (1, 3), (3, 5), (5, 7), (0, 1)]],
            features,
            labels,
            2,
        )
        .unwrap()
        .0
    }

    fn forward_once(mode: EdgeMode) -> (ForwardOutput, HedgeConfig) {
        let graph = tiny_graph();
        let split = make_split(&graph, (0.5, 0.25, 0.25), 1).unwrap();
        let cfg = HedgeConfig {
            hidden_dim: 4,
            k_pe: 1,
            epochs: 1,
            ..HedgeConfig::default()
        };
        let model = HedgeModel::new(&graph, cfg.clone(), &split).unwrap();
        let params = model.init_params();
        let mut tape = Tape::new();
        let ids = params.insert_leaves(&mut tape);
        let mut noise_rng = rng::seeded(3);
        let noise = draw_noise(cfg.layers, graph.num_nodes(), &mut noise_rng);
        let subset = split.train.clone();
        let out = model
            .forward(&mut tape, &ids, &subset, &noise, mode)
            .unwrap();
        (out, cfg)
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let (out, _) = forward_once(EdgeMode::SampledStraightThrough);
        for a in &out.attention {
            for i in 0..a.rows() {
                let s: f64 = a.row(i).iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "row {i} sums to {s}");
            }
        }
    }

    #[test]
    fn sampled_adjacency_is_symmetric_binary_zero_diagonal() {
        for mode in [EdgeMode::SampledStraightThrough, EdgeMode::MapDecode] {
            let (out, _) = forward_once(mode);
            for adj in &out.generated_adj {
                for i in 0..adj.rows() {
                    assert_eq!(adj.get(i, i), 0.0);
                    for j in 0..adj.cols() {
                        let v = adj.get(i, j);
                        assert!(v == 0.0 || v == 1.0, "entry {v}");
                        assert_eq!(v, adj.get(j, i));
                    }
                }
            }
        }
    }

    #[test]
    fn soft_adjacency_stays_in_unit_interval() {
        let (out, _) = forward_once(EdgeMode::SoftRelaxation);
        for adj in &out.generated_adj {
            for i in 0..adj.rows() {
                assert_eq!(adj.get(i, i), 0.0);
                for j in 0..adj.cols() {
                    let v = adj.get(i, j);
                    assert!((0.0..=1.0).contains(&v), "entry {v}");
                }
            }
        }
    }

    #[test]
    fn probabilities_are_row_stochastic() {
        let (out, _) = forward_once(EdgeMode::SampledStraightThrough);
        for i in 0..out.probs.rows() {
            let s: f64 = out.probs.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_decomposes_with_alpha_beta_zero() {
        let graph = tiny_graph();
        let split = make_split(&graph, (0.5, 0.25, 0.25), 1).unwrap();
        let cfg = HedgeConfig {
            hidden_dim: 4,
            k_pe: 1,
            alpha: 0.0,
            beta: 0.0,
            ..HedgeConfig::default()
        };
        let model = HedgeModel::new(&graph, cfg.clone(), &split).unwrap();
        let params = model.init_params();
        let mut tape = Tape::new();
        let ids = params.insert_leaves(&mut tape);
        let mut noise_rng = rng::seeded(3);
        let noise = draw_noise(cfg.layers, graph.num_nodes(), &mut noise_rng);
        let out = model
            .forward(
                &mut tape,
                &ids,
                &split.train,
                &noise,
                EdgeMode::SampledStraightThrough,
            )
            .unwrap();
        let total = tape.value(out.loss.unwrap()).item();
        assert!((total - out.cross_entropy).abs() < 1e-12);
    }

    #[test]
    fn single_node_attention_is_one() {
        let g = MultiRelationGraph::build(
            2,
            vec![vec![(0, 1)]],
            Tensor::zeros(2, 1),
            vec![Some(0), Some(1)],
            2,
        )
        .unwrap()
        .0;
        let split = SplitMask {
            train: vec![0, 1],
            val: vec![],
            test: vec![],
            seed: 0,
            ratios: (1.0, 0.0, 0.0),
        };
        let cfg = HedgeConfig {
            hidden_dim: 2,
            k_pe: 1,
            ..HedgeConfig::default()
        };
        let model = HedgeModel::new(&g, cfg.clone(), &split).unwrap();
        let params = model.init_params();
        let mut tape = Tape::new();
        let ids = params.insert_leaves(&mut tape);
        let mut noise_rng = rng::seeded(0);
        let noise = draw_noise(cfg.layers, 2, &mut noise_rng);
        let out = model
            .forward(
                &mut tape,
                &ids,
                &[0, 1],
                &noise,
                EdgeMode::SampledStraightThrough,
            )
            .unwrap();
        // Two nodes: each attention row is a 2-way softmax, still sums to 1.
        for i in 0..2 {
            let s: f64 = out.attention[0].row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn esgs_soft_worked_examples() {
        // Symmetric case: equal logits and noise give exactly one half.
        assert_eq!(esgs_soft(0.5, 0.0, 0.0, 1.0), 0.5);
        // Probability driven to the clamp ceiling: log(1 - p) explodes and
        // the soft indicator saturates at 1.
        assert!(esgs_soft(1.0 - EDGE_PROB_EPS, 0.0, 0.0, 1.0) > 1.0 - 1e-5);
        assert!(esgs_soft(1.0 - EDGE_PROB_EPS, -3.0, 3.0, 1.0) > 1.0 - 1e-2);
        // Temperature sharpens but never crosses one half.
        let warm = esgs_soft(0.7, 0.2, -0.1, 1.0);
        let cold = esgs_soft(0.7, 0.2, -0.1, 0.1);
        assert!(warm > 0.5 && cold > warm);
    }

    #[test]
    fn esgs_hard_frequency_matches_edge_probability() {
        // Gumbel-argmax marginal: P(L1 > L2) equals the edge probability.
        use rand::Rng;
        let p = 0.3;
        let draws = 20_000;
        let mut rng = rng::seeded(21);
        let mut hits = 0usize;
        for _ in 0..draws {
            let g1 = crate::tensor::gumbel_from_uniform(rng.random::<f64>());
            let g2 = crate::tensor::gumbel_from_uniform(rng.random::<f64>());
            if esgs_soft(p, g1, g2, 1.0) > 0.5 {
                hits += 1;
            }
        }
        let freq = hits as f64 / draws as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        assert!(
            (freq - p).abs() < 3.0 * sigma,
            "frequency {freq} vs {p} (3 sigma = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn zero_query_key_weights_give_uniform_attention() {
        let graph = tiny_graph();
        let split = make_split(&graph, (0.5, 0.25, 0.25), 1).unwrap();
        let cfg = HedgeConfig {
            hidden_dim: 4,
            k_pe: 1,
            ..HedgeConfig::default()
        };
        let model = HedgeModel::new(&graph, cfg.clone(), &split).unwrap();
        let mut params = model.init_params();
        for idx in 0..params.len() {
            let name = params.name(idx).to_string();
            if name.contains("w_query") || name.contains("w_key") {
                let t = params.tensor_mut(idx);
                for v in t.data_mut() {
                    *v = 0.0;
                }
            }
        }
        let mut tape = Tape::new();
        let ids = params.insert_leaves(&mut tape);
        let mut noise_rng = rng::seeded(5);
        let noise = draw_noise(cfg.layers, graph.num_nodes(), &mut noise_rng);
        let out = model
            .forward(
                &mut tape,
                &ids,
                &[],
                &noise,
                EdgeMode::SampledStraightThrough,
            )
            .unwrap();
        let n = graph.num_nodes() as f64;
        for a in &out.attention {
            for v in a.data() {
                assert!(
                    (v - 1.0 / n).abs() < 1e-12,
                    "entry {v} vs uniform {}",
                    1.0 / n
                );
            }
        }
    }

    #[test]
    fn degree_normalization_worked_examples() {
        // Two nodes, one edge: c = sqrt(1 * 1) = 1, so the aggregation swaps
        // rows; with nonnegative inputs the ReLU in the forward is identity.
        let mut tape = Tape::new();
        let adj = tape.constant(Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
        let norm = degree_normalized(&mut tape, adj).unwrap();
        let h = tape.constant(Tensor::from_rows(&[vec![2.0, 3.0], vec![5.0, 7.0]]));
        let out = tape.matmul(norm, h).unwrap();
        assert_eq!(tape.value(out).row(0), &[5.0, 7.0]);
        assert_eq!(tape.value(out).row(1), &[2.0, 3.0]);

        // Empty adjacency: everything stays zero.
        let mut tape = Tape::new();
        let adj = tape.constant(Tensor::zeros(3, 3));
        let norm = degree_normalized(&mut tape, adj).unwrap();
        assert_eq!(tape.value(norm), &Tensor::zeros(3, 3));

        // Four-node star: each center-leaf coefficient is 1/sqrt(3).
        let mut tape = Tape::new();
        let mut star = Tensor::zeros(4, 4);
        for leaf in 1..4 {
            star.set(0, leaf, 1.0);
            star.set(leaf, 0, 1.0);
        }
        let adj = tape.constant(star);
        let norm = degree_normalized(&mut tape, adj).unwrap();
        let expect = 1.0 / 3.0_f64.sqrt();
        for leaf in 1..4 {
            assert!((tape.value(norm).get(0, leaf) - expect).abs() < 1e-12);
            assert!((tape.value(norm).get(leaf, 0) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_worked_example_is_ln_two() {
        // One training node with p = 0.5 on its true class.
        let mut tape = Tape::new();
        let probs = tape.constant(Tensor::from_rows(&[vec![0.5, 0.5]]));
        let log_probs = tape.log(probs);
        let mut mask = Tensor::zeros(1, 2);
        mask.set(0, 1, 1.0);
        let masked = tape.masked_sum(log_probs, mask).unwrap();
        let ce = tape.scale(masked, -1.0);
        assert!((tape.value(ce).item() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn penalty_worked_example_sums_squared_cross_attention() {
        // Two train nodes with different labels, a01 = 0.3, a10 = 0.1:
        // penalty = 0.09 + 0.01 = 0.10 over ordered pairs.
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_rows(&[vec![0.6, 0.3], vec![0.1, 0.9]]));
        let sq = tape.square(a);
        let mut mask = Tensor::zeros(2, 2);
        mask.set(0, 1, 1.0);
        mask.set(1, 0, 1.0);
        let p = tape.masked_sum(sq, mask).unwrap();
        assert!((tape.value(p).item() - 0.10).abs() < 1e-15);
    }

    #[test]
    fn mean_with_self_matches_sage_mean() {
        // Isolated node: mean of the singleton set is the node itself.
        let g = MultiRelationGraph::build(
            3,
            vec![vec![(0, 1)]],
            Tensor::zeros(3, 1),
            vec![Some(0), Some(1), Some(0)],
            2,
        )
        .unwrap()
        .0;
        let m = mean_with_self_matrix(&g, 0);
        assert_eq!(m.get(2, 2), 1.0);
        assert_eq!(m.get(2, 0), 0.0);
        // One neighbor: (h_v + h_u) / 2.
        assert_eq!(m.get(0, 0), 0.5);
        assert_eq!(m.get(0, 1), 0.5);
    }

    #[test]
    fn attention_branch_with_uniform_map_averages_columns() {
        // Uniform attention and identity value weights make every row of
        // the attention branch the column mean of h.
        let mut tape = Tape::new();
        let n = 4;
        let a = tape.constant(Tensor::filled(n, n, 1.0 / n as f64));
        let h = tape.constant(Tensor::from_rows(&[
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![5.0, 6.0],
            vec![7.0, 8.0],
        ]));
        let out = tape.matmul(a, h).unwrap();
        for i in 0..n {
            assert!((tape.value(out).get(i, 0) - 4.0).abs() < 1e-12);
            assert!((tape.value(out).get(i, 1) - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fused_width_is_hidden_dim_and_edgeless_drops_original_branch() {
        let graph = tiny_graph();
        let split = make_split(&graph, (0.5, 0.25, 0.25), 1).unwrap();
        for edgeless in [false, true] {
            let cfg = HedgeConfig {
                hidden_dim: 4,
                k_pe: 1,
                edgeless,
                ..HedgeConfig::default()
            };
            let model = HedgeModel::new(&graph, cfg.clone(), &split).unwrap();
            let params = model.init_params();
            // The first FFN map consumes the fused concat width.
            let expected_cat = if edgeless { 2 * 4 } else { 3 * 4 };
            assert_eq!(
                params.by_name("layer0.ffn_w1").unwrap().rows(),
                expected_cat
            );
            assert!(params.by_name("layer0.w_orig0").is_some() != edgeless);
            let mut tape = Tape::new();
            let ids = params.insert_leaves(&mut tape);
            let mut noise_rng = rng::seeded(5);
            let noise = draw_noise(cfg.layers, graph.num_nodes(), &mut noise_rng);
            let out = model
                .forward(
                    &mut tape,
                    &ids,
                    &[],
                    &noise,
                    EdgeMode::SampledStraightThrough,
                )
                .unwrap();
            // Output width is hidden_dim either way.
            assert_eq!(out.embeddings.cols(), 4);
        }
    }

    #[test]
    fn oversized_graph_is_rejected() {
        let n = MAX_DENSE_NODES + 1;
        let labels: Vec<Option<usize>> = (0..n).map(|v| Some(v % 2)).collect();
        let g = MultiRelationGraph::build(n, vec![vec![(0, 1)]], Tensor::zeros(n, 1), labels, 2)
            .unwrap()
            .0;
        let split = SplitMask {
            train: vec![0, 1],
            val: vec![],
            test: vec![],
            seed: 0,
            ratios: (1.0, 0.0, 0.0),
        };
        let err = match HedgeModel::new(&g, HedgeConfig::default(), &split) {
            Ok(_) => panic!("oversized graph accepted"),
            Err(e) => e,
        };
        assert!(err.to_string().contains("dense attention"), "{err}");
    }
}
