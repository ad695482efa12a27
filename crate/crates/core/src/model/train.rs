//! The training loop shared by the edge-generating model and the baselines:
//! full-batch Adam over a class-balanced per-epoch label subset, validation
//! every few epochs, and best-validation checkpoint selection.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::baselines::BaselineModel;
use super::hedge::{adjacency_edges, draw_noise, EdgeMode, HedgeModel};
use super::optim::Adam;
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::eval::{self, MetricsReport};
use crate::graph::{MultiRelationGraph, SplitMask};
use crate::rng;
use crate::tensor::{Tape, Tensor, TensorId};

#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub cross_entropy: f64,
    pub penalty: f64,
    /// Edge-probability clamp activations this epoch.
    pub clamped: usize,
    /// Present on validation epochs.
    pub val_auc: Option<f64>,
}

/// Result of one training run, evaluated at the best-validation checkpoint.
pub struct TrainOutcome {
    pub report: MetricsReport,
    pub history: Vec<EpochRecord>,
    pub best_params: ParamSet,
    pub best_epoch: usize,
    pub best_val_auc: Option<f64>,
    /// Class probabilities for every node at the best checkpoint.
    pub probs: Tensor,
    /// Final node representations (edge-generating model only).
    pub embeddings: Option<Tensor>,
    /// Deterministically decoded generated edges at the best checkpoint,
    /// united over layers (edge-generating model only).
    pub generated_edges: Option<Vec<(usize, usize)>>,
    /// Evaluation-time attention maps at the best checkpoint
    /// (edge-generating model only).
    pub attention: Option<Vec<Tensor>>,
}

struct Schedule {
    epochs: usize,
    learning_rate: f64,
    eval_every: usize,
    downsample_ratio: f64,
    seed: u64,
}

struct StepOutput {
    loss: TensorId,
    cross_entropy: f64,
    penalty: f64,
    clamped: usize,
}

trait Trainable {
    fn graph(&self) -> &MultiRelationGraph;
    fn split(&self) -> &SplitMask;
    fn schedule(&self) -> Schedule;
    fn initial_params(&self) -> ParamSet;
    fn training_step(
        &self,
        tape: &mut Tape,
        ids: &[TensorId],
        subset: &[usize],
        noise_rng: &mut ChaCha8Rng,
    ) -> Result<StepOutput>;
    /// Deterministic class probabilities for every node.
    fn evaluate(&self, params: &ParamSet) -> Result<Tensor>;
}

/// Class-balanced subset of the train split: equal counts per class, capped
/// by the minority class, totalling about `ratio * |train|`.
fn class_balanced_subset(
    graph: &MultiRelationGraph,
    train: &[usize],
    ratio: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let k = graph.label_arity();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &v in train {
        let label = graph
            .label(v)
            .ok_or_else(|| Error::validation(format!("train split contains unlabeled node {v}")))?;
        by_class[label].push(v);
    }
    let min_count = by_class.iter().map(Vec::len).min().unwrap_or(0);
    if min_count == 0 {
        return Err(Error::validation(
            "a class has no training nodes; cannot draw a balanced subset",
        ));
    }
    let target_total = ((ratio * train.len() as f64).floor() as usize).max(1);
    let per_class = (target_total / k).max(1).min(min_count);
    let mut subset = Vec::with_capacity(per_class * k);
    for members in &by_class {
        subset.extend(rng::sample_without_replacement(members, per_class, rng));
    }
    subset.sort_unstable();
    Ok(subset)
}

/// AUC of the class probabilities on `nodes`: class-1 scores for binary
/// labels, macro one-vs-rest for more classes.
pub fn auc_on_nodes(probs: &Tensor, graph: &MultiRelationGraph, nodes: &[usize]) -> Result<f64> {
    let k = graph.label_arity();
    if k == 2 {
        let scores: Vec<f64> = nodes.iter().map(|&v| probs.get(v, 1)).collect();
        let labels: Vec<bool> = nodes.iter().map(|&v| graph.label(v) == Some(1)).collect();
        eval::auc(&scores, &labels)
    } else {
        let rows: Vec<Vec<f64>> = nodes.iter().map(|&v| probs.row(v).to_vec()).collect();
        let labels: Vec<usize> = nodes.iter().map(|&v| graph.label(v).unwrap()).collect();
        eval::macro_ovr(&rows, &labels, eval::auc)
    }
}

fn ap_on_nodes(probs: &Tensor, graph: &MultiRelationGraph, nodes: &[usize]) -> Result<f64> {
    let k = graph.label_arity();
    if k == 2 {
        let scores: Vec<f64> = nodes.iter().map(|&v| probs.get(v, 1)).collect();
        let labels: Vec<bool> = nodes.iter().map(|&v| graph.label(v) == Some(1)).collect();
        eval::average_precision(&scores, &labels)
    } else {
        let rows: Vec<Vec<f64>> = nodes.iter().map(|&v| probs.row(v).to_vec()).collect();
        let labels: Vec<usize> = nodes.iter().map(|&v| graph.label(v).unwrap()).collect();
        eval::macro_ovr(&rows, &labels, eval::average_precision)
    }
}

fn accuracy_on_nodes(probs: &Tensor, graph: &MultiRelationGraph, nodes: &[usize]) -> f64 {
    let predicted: Vec<usize> = nodes
        .iter()
        .map(|&v| {
            probs
                .row(v)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        })
        .collect();
    let actual: Vec<usize> = nodes.iter().map(|&v| graph.label(v).unwrap()).collect();
    eval::accuracy(&predicted, &actual)
}

fn run_training<M: Trainable>(model: &M, config_hash: String) -> Result<(TrainOutcome, ParamSet)> {
    let started = Instant::now();
    let schedule = model.schedule();
    let split = model.split();
    let graph = model.graph();
    if split.train.is_empty() {
        return Err(Error::validation("train split is empty"));
    }

    let mut params = model.initial_params();
    let mut adam = Adam::new(&params, schedule.learning_rate);
    let mut subset_rng = rng::stream(schedule.seed, 3);
    let mut noise_rng = rng::stream(schedule.seed, 4);

    let mut history = Vec::with_capacity(schedule.epochs);
    let mut best: Option<(ParamSet, usize, f64)> = None;

    for epoch in 0..schedule.epochs {
        let subset = class_balanced_subset(
            graph,
            &split.train,
            schedule.downsample_ratio,
            &mut subset_rng,
        )?;
        let mut tape = Tape::new();
        let ids = params.insert_leaves(&mut tape);
        let step = model.training_step(&mut tape, &ids, &subset, &mut noise_rng)?;
        let loss_value = tape.value(step.loss).item();
        if !loss_value.is_finite() {
            return Err(Error::numeric(format!(
                "loss became non-finite at epoch {epoch}"
            )));
        }
        tape.backward(step.loss)?;
        let grads = params.collect_grads(&tape, &ids);
        adam.step(&mut params, &grads);
        if let Some(name) = params.first_non_finite() {
            return Err(Error::numeric(format!(
                "parameter {name} became non-finite at epoch {epoch}"
            )));
        }

        let mut val_auc = None;
        let is_eval_epoch = (epoch + 1) % schedule.eval_every == 0 || epoch + 1 == schedule.epochs;
        if is_eval_epoch && !split.val.is_empty() {
            let probs = model.evaluate(&params)?;
            let auc = auc_on_nodes(&probs, graph, &split.val)?;
            val_auc = Some(auc);
            // Ties prefer the later (longer-trained) checkpoint.
            let better = match &best {
                None => true,
                Some((_, _, best_auc)) => auc >= *best_auc,
            };
            if better {
                best = Some((params.clone(), epoch, auc));
            }
        }
        history.push(EpochRecord {
            epoch,
            loss: loss_value,
            cross_entropy: step.cross_entropy,
            penalty: step.penalty,
            clamped: step.clamped,
            val_auc,
        });
    }

    let (best_params, best_epoch, best_val_auc) = match best {
        Some((p, e, a)) => (p, e, Some(a)),
        None => (params, schedule.epochs - 1, None),
    };
    let probs = model.evaluate(&best_params)?;

    // Report on the test split; fall back to the train split when no test
    // nodes exist (capacity checks train on everything).
    let metric_nodes: &[usize] = if !split.test.is_empty() {
        &split.test
    } else {
        &split.train
    };
    let report = MetricsReport {
        auc: auc_on_nodes(&probs, graph, metric_nodes)?,
        ap: ap_on_nodes(&probs, graph, metric_nodes)?,
        accuracy: accuracy_on_nodes(&probs, graph, metric_nodes),
        train_size: split.train.len(),
        val_size: split.val.len(),
        test_size: split.test.len(),
        config_hash,
        seed: schedule.seed,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };

    Ok((
        TrainOutcome {
            report,
            history,
            best_params: best_params.clone(),
            best_epoch,
            best_val_auc,
            probs,
            embeddings: None,
            generated_edges: None,
            attention: None,
        },
        best_params,
    ))
}

impl<'a> Trainable for HedgeModel<'a> {
    fn graph(&self) -> &MultiRelationGraph {
        HedgeModel::graph(self)
    }

    fn split(&self) -> &SplitMask {
        HedgeModel::split(self)
    }

    fn schedule(&self) -> Schedule {
        Schedule {
            epochs: self.cfg.epochs,
            learning_rate: self.cfg.learning_rate,
            eval_every: self.cfg.eval_every,
            downsample_ratio: self.cfg.downsample_ratio,
            seed: self.cfg.seed,
        }
    }

    fn initial_params(&self) -> ParamSet {
        self.init_params()
    }

    fn training_step(
        &self,
        tape: &mut Tape,
        ids: &[TensorId],
        subset: &[usize],
        noise_rng: &mut ChaCha8Rng,
    ) -> Result<StepOutput> {
        let noise = draw_noise(
            self.cfg.layers,
            HedgeModel::graph(self).num_nodes(),
            noise_rng,
        );
        let out = self.forward(tape, ids, subset, &noise, EdgeMode::SampledStraightThrough)?;
        Ok(StepOutput {
            loss: out.loss.expect("training subset given"),
            cross_entropy: out.cross_entropy,
            penalty: out.penalty,
            clamped: out.clamped,
        })
    }

    fn evaluate(&self, params: &ParamSet) -> Result<Tensor> {
        let mut tape = Tape::new();
        let ids = params.insert_leaves(&mut tape);
        let out = self.forward(&mut tape, &ids, &[], &[], EdgeMode::MapDecode)?;
        Ok(out.probs)
    }
}

/// Trains the edge-generating model and evaluates its artifacts at the best
/// checkpoint.
pub fn train_hedge(model: &HedgeModel<'_>) -> Result<TrainOutcome> {
    let hash = eval::config_hash(&model.cfg);
    let (mut outcome, best_params) = run_training(model, hash)?;

    // Deterministic evaluation-mode artifacts at the best checkpoint.
    let mut tape = Tape::new();
    let ids = best_params.insert_leaves(&mut tape);
    let out = model.forward(&mut tape, &ids, &[], &[], EdgeMode::MapDecode)?;
    let mut edges: Vec<(usize, usize)> =
        out.generated_adj.iter().flat_map(adjacency_edges).collect();
    edges.sort_unstable();
    edges.dedup();
    outcome.embeddings = Some(out.embeddings);
    outcome.generated_edges = Some(edges);
    outcome.attention = Some(out.attention);
    Ok(outcome)
}

/// Trains a baseline with the identical loop.
pub fn train_baseline(model: &BaselineModel<'_>, split: &SplitMask) -> Result<TrainOutcome> {
    struct Bound<'a, 'g> {
        model: &'a BaselineModel<'g>,
        split: &'a SplitMask,
    }
    impl<'a, 'g> Trainable for Bound<'a, 'g> {
        fn graph(&self) -> &MultiRelationGraph {
            self.model.graph()
        }
        fn split(&self) -> &SplitMask {
            self.split
        }
        fn schedule(&self) -> Schedule {
            Schedule {
                epochs: self.model.cfg.epochs,
                learning_rate: self.model.cfg.learning_rate,
                eval_every: self.model.cfg.eval_every,
                downsample_ratio: self.model.cfg.downsample_ratio,
                seed: self.model.cfg.seed,
            }
        }
        fn initial_params(&self) -> ParamSet {
            self.model.init_params()
        }
        fn training_step(
            &self,
            tape: &mut Tape,
            ids: &[TensorId],
            subset: &[usize],
            _noise_rng: &mut ChaCha8Rng,
        ) -> Result<StepOutput> {
            let (loss, _) = self.model.forward(tape, ids, subset)?;
            let loss = loss.expect("training subset given");
            Ok(StepOutput {
                loss,
                cross_entropy: tape.value(loss).item(),
                penalty: 0.0,
                clamped: 0,
            })
        }
        fn evaluate(&self, params: &ParamSet) -> Result<Tensor> {
            let mut tape = Tape::new();
            let ids = params.insert_leaves(&mut tape);
            let (_, probs) = self.model.forward(&mut tape, &ids, &[])?;
            Ok(probs)
        }
    }
    let bound = Bound { model, split };
    let hash = eval::config_hash(&model.cfg);
    let (outcome, _) = run_training(&bound, hash)?;
    Ok(outcome)
}
