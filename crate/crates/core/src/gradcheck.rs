//! Central finite-difference gradient checks.
//!
//! The numeric side only ever evaluates forward passes, so it is independent
//! of every backward rule it validates. Step size is 1e-5 throughout; the
//! reported error for one entry is `|analytic - numeric| / max(|analytic|,
//! |numeric|)`, taken as zero when both are below 1e-8.

use serde::Serialize;

use crate::csbm::{self, CsbmParams};
use crate::error::Result;
use crate::graph::make_split;
use crate::model::hedge::{draw_noise, EdgeMode, HedgeModel, LayerNoise};
use crate::model::{HedgeConfig, ParamSet};
use crate::rng;
use crate::tensor::{Tape, Tensor, TensorId};

pub const FD_STEP: f64 = 1e-5;
pub const PRIMITIVE_TOLERANCE: f64 = 1e-6;
pub const END_TO_END_TOLERANCE: f64 = 1e-4;
const BOTH_ZERO: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckResult {
    pub name: String,
    pub max_rel_err: f64,
}

/// Entrywise relative error between two gradients.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let mut worst: f64 = 0.0;
    for (&a, &n) in analytic.data().iter().zip(numeric.data()) {
        let denom = a.abs().max(n.abs());
        if denom < BOTH_ZERO {
            continue;
        }
        worst = worst.max((a - n).abs() / denom);
    }
    worst
}

/// Central finite differences of a scalar function of several tensors,
/// taken with respect to input `arg`.
pub fn finite_difference(
    f: &mut dyn FnMut(&[Tensor]) -> f64,
    inputs: &[Tensor],
    arg: usize,
) -> Tensor {
    let mut work: Vec<Tensor> = inputs.to_vec();
    let (rows, cols) = inputs[arg].shape();
    let mut grad = Tensor::zeros(rows, cols);
    for i in 0..rows * cols {
        let original = work[arg].data()[i];
        work[arg].data_mut()[i] = original + FD_STEP;
        let plus = f(&work);
        work[arg].data_mut()[i] = original - FD_STEP;
        let minus = f(&work);
        work[arg].data_mut()[i] = original;
        grad.data_mut()[i] = (plus - minus) / (2.0 * FD_STEP);
    }
    grad
}

/// Checks one primitive: scalarizes its output with a fixed random weight
/// mask, compares the tape gradient of every input against central
/// differences, and returns the worst relative error.
fn check_primitive(
    name: &str,
    inputs: &[Tensor],
    build: &dyn Fn(&mut Tape, &[TensorId]) -> TensorId,
    weights: &Tensor,
) -> GradCheckResult {
    let mut forward = |values: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let ids: Vec<TensorId> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &ids);
        let loss = tape.masked_sum(out, weights.clone()).unwrap();
        tape.value(loss).item()
    };

    let mut tape = Tape::new();
    let ids: Vec<TensorId> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &ids);
    let loss = tape.masked_sum(out, weights.clone()).unwrap();
    tape.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (arg, &id) in ids.iter().enumerate() {
        let analytic = tape
            .grad(id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[arg].rows(), inputs[arg].cols()));
        let numeric = finite_difference(&mut forward, inputs, arg);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    GradCheckResult {
        name: name.to_string(),
        max_rel_err: worst,
    }
}

fn random_tensor(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Tensor {
    use rand::Rng;
    let mut t = Tensor::zeros(rows, cols);
    for v in t.data_mut() {
        *v = lo + (hi - lo) * rng.random::<f64>();
    }
    t
}

/// Gradient-checks every tape primitive on random 3x4 (and compatible)
/// inputs.
pub fn check_all_primitives(seed: u64) -> Vec<GradCheckResult> {
    let mut rng = rng::seeded(seed);
    let a = random_tensor(3, 4, -1.5, 1.5, &mut rng);
    let b = random_tensor(3, 4, -1.5, 1.5, &mut rng);
    let m = random_tensor(4, 3, -1.5, 1.5, &mut rng);
    let pos = random_tensor(3, 4, 0.2, 1.8, &mut rng);
    let row = random_tensor(1, 4, -1.2, 1.2, &mut rng);
    let col = random_tensor(3, 1, -1.2, 1.2, &mut rng);
    let square_in = random_tensor(3, 3, -1.5, 1.5, &mut rng);
    let w34 = random_tensor(3, 4, 0.5, 1.5, &mut rng);
    let w33 = random_tensor(3, 3, 0.5, 1.5, &mut rng);
    let w31 = random_tensor(3, 1, 0.5, 1.5, &mut rng);
    let w43 = random_tensor(4, 3, 0.5, 1.5, &mut rng);
    let w38 = random_tensor(3, 8, 0.5, 1.5, &mut rng);
    let w11 = random_tensor(1, 1, 0.5, 1.5, &mut rng);
    let w54 = random_tensor(5, 4, 0.5, 1.5, &mut rng);
    let gather_idx = vec![2usize, 0, 1, 0, 2];
    let scatter_idx = vec![1usize, 3, 1];
    let mask = random_tensor(3, 4, 0.0, 1.0, &mut rng);

    let mut results = Vec::new();
    results.push(check_primitive(
        "matmul",
        &[a.clone(), m.clone()],
        &|t, ids| t.matmul(ids[0], ids[1]).unwrap(),
        &w33,
    ));
    results.push(check_primitive(
        "matmul_nt",
        &[a.clone(), b.clone()],
        &|t, ids| t.matmul_nt(ids[0], ids[1]).unwrap(),
        &w33,
    ));
    results.push(check_primitive(
        "transpose",
        std::slice::from_ref(&a),
        &|t, ids| t.transpose(ids[0]),
        &w43,
    ));
    results.push(check_primitive(
        "add",
        &[a.clone(), b.clone()],
        &|t, ids| t.add(ids[0], ids[1]).unwrap(),
        &w34,
    ));
    results.push(check_primitive(
        "sub",
        &[a.clone(), b.clone()],
        &|t, ids| t.sub(ids[0], ids[1]).unwrap(),
        &w34,
    ));
    results.push(check_primitive(
        "scale",
        std::slice::from_ref(&a),
        &|t, ids| t.scale(ids[0], -1.7),
        &w34,
    ));
    results.push(check_primitive(
        "add_scalar",
        std::slice::from_ref(&a),
        &|t, ids| t.add_scalar(ids[0], 0.37),
        &w34,
    ));
    results.push(check_primitive(
        "concat_cols",
        &[a.clone(), b.clone()],
        &|t, ids| t.concat_cols(ids[0], ids[1]).unwrap(),
        &w38,
    ));
    results.push(check_primitive(
        "row_mean",
        std::slice::from_ref(&a),
        &|t, ids| t.row_mean(ids[0]),
        &w31,
    ));
    results.push(check_primitive(
        "row_sum",
        std::slice::from_ref(&a),
        &|t, ids| t.row_sum(ids[0]),
        &w31,
    ));
    results.push(check_primitive(
        "softmax_rows",
        std::slice::from_ref(&a),
        &|t, ids| t.softmax_rows(ids[0]),
        &w34,
    ));
    results.push(check_primitive(
        "relu",
        std::slice::from_ref(&a),
        &|t, ids| t.relu(ids[0]),
        &w34,
    ));
    results.push(check_primitive(
        "sigmoid",
        std::slice::from_ref(&a),
        &|t, ids| t.sigmoid(ids[0]),
        &w34,
    ));
    results.push(check_primitive(
        "layer_norm_rows",
        std::slice::from_ref(&a),
        &|t, ids| t.layer_norm_rows(ids[0]),
        &w34,
    ));
    results.push(check_primitive(
        "mul",
        &[a.clone(), b.clone()],
        &|t, ids| t.mul(ids[0], ids[1]).unwrap(),
        &w34,
    ));
    results.push(check_primitive(
        "mul_row_broadcast",
        &[a.clone(), row.clone()],
        &|t, ids| t.mul_row_broadcast(ids[0], ids[1]).unwrap(),
        &w34,
    ));
    results.push(check_primitive(
        "mul_col_broadcast",
        &[a.clone(), col.clone()],
        &|t, ids| t.mul_col_broadcast(ids[0], ids[1]).unwrap(),
        &w34,
    ));
    results.push(check_primitive(
        "add_row_broadcast",
        &[a.clone(), row.clone()],
        &|t, ids| t.add_row_broadcast(ids[0], ids[1]).unwrap(),
        &w34,
    ));
    results.push(check_primitive(
        "rsqrt_guard",
        std::slice::from_ref(&pos),
        &|t, ids| t.rsqrt_guard(ids[0]),
        &w34,
    ));
    results.push(check_primitive(
        "log",
        std::slice::from_ref(&pos),
        &|t, ids| t.log(ids[0]),
        &w34,
    ));
    results.push(check_primitive(
        "square",
        std::slice::from_ref(&a),
        &|t, ids| t.square(ids[0]),
        &w34,
    ));
    results.push(check_primitive(
        "clamp",
        std::slice::from_ref(&a),
        // Band chosen so some entries clamp and none sit on the boundary.
        &|t, ids| t.clamp(ids[0], -0.9, 0.9),
        &w34,
    ));
    results.push(check_primitive(
        "gather_rows",
        std::slice::from_ref(&a),
        &|t, ids| t.gather_rows(ids[0], &gather_idx).unwrap(),
        &w54,
    ));
    results.push(check_primitive(
        "scatter_add_rows",
        std::slice::from_ref(&a),
        &|t, ids| t.scatter_add_rows(ids[0], &scatter_idx, 5).unwrap(),
        &w54,
    ));
    results.push(check_primitive(
        "masked_sum",
        std::slice::from_ref(&a),
        &|t, ids| t.masked_sum(ids[0], mask.clone()).unwrap(),
        &w11,
    ));
    results.push(check_primitive(
        "sum_all",
        std::slice::from_ref(&a),
        &|t, ids| t.sum_all(ids[0]),
        &w11,
    ));
    results.push(check_primitive(
        "straight_through",
        std::slice::from_ref(&a),
        // A hard forward is piecewise constant, so finite differences can
        // only see the soft route: pass the soft values as the payload and
        // the estimator must reproduce the sigmoid gradient exactly.
        &|t, ids| {
            let soft = t.sigmoid(ids[0]);
            let soft_values = t.value(soft).clone();
            t.straight_through(soft, soft_values).unwrap()
        },
        &w34,
    ));
    results.push(check_primitive(
        "zero_diagonal",
        std::slice::from_ref(&square_in),
        &|t, ids| t.zero_diagonal(ids[0]).unwrap(),
        &w33,
    ));
    results
}

/// Configuration of the small end-to-end check graph: 12 nodes, temperature
/// one, soft relaxation, frozen noise.
pub fn end_to_end_fixture(seed: u64) -> (CsbmParams, HedgeConfig) {
    let params = CsbmParams {
        mu0: vec![0.8, 0.0],
        mu1: vec![-0.8, 0.4],
        degree: 2,
        h0: 1.0,
        h1: 0.5,
        n_per_class: 6,
        seed,
    };
    let cfg = HedgeConfig {
        layers: 2,
        hidden_dim: 4,
        k_pe: 2,
        tau: 1.0,
        lambda_edge: 2.0,
        alpha: 1.0,
        beta: 0.05,
        seed,
        downsample_ratio: 1.0,
        epochs: 1,
        ..HedgeConfig::default()
    };
    (params, cfg)
}

/// End-to-end check: the full loss on a 12-node generated graph, soft edge
/// relaxation, frozen Gumbel noise, finite differences over every parameter
/// entry.
pub fn check_hedge_end_to_end(seed: u64) -> Result<GradCheckResult> {
    let (csbm_params, cfg) = end_to_end_fixture(seed);
    let sample = csbm::generate(&csbm_params)?;
    let graph = sample.graph;
    let split = make_split(&graph, (0.5, 0.25, 0.25), seed)?;
    let model = HedgeModel::new(&graph, cfg.clone(), &split)?;
    let params = model.init_params();
    let mut noise_rng = rng::stream(seed, 9);
    let noise = draw_noise(cfg.layers, graph.num_nodes(), &mut noise_rng);
    let subset = split.train.clone();

    let loss_of = |p: &ParamSet, noise: &[LayerNoise]| -> Result<f64> {
        let mut tape = Tape::new();
        let ids = p.insert_leaves(&mut tape);
        let out = model.forward(&mut tape, &ids, &subset, noise, EdgeMode::SoftRelaxation)?;
        Ok(tape.value(out.loss.expect("subset nonempty")).item())
    };

    // Analytic gradients.
    let mut tape = Tape::new();
    let ids = params.insert_leaves(&mut tape);
    let out = model.forward(&mut tape, &ids, &subset, &noise, EdgeMode::SoftRelaxation)?;
    tape.backward(out.loss.expect("subset nonempty"))?;
    let analytic = params.collect_grads(&tape, &ids);

    // Numeric sweep over every entry of every parameter.
    let mut worst: f64 = 0.0;
    let mut perturbed = params.clone();
    for idx in 0..perturbed.len() {
        let (rows, cols) = perturbed.tensor(idx).shape();
        for i in 0..rows * cols {
            let original = perturbed.tensor(idx).data()[i];
            perturbed.tensor_mut(idx).data_mut()[i] = original + FD_STEP;
            let plus = loss_of(&perturbed, &noise)?;
            perturbed.tensor_mut(idx).data_mut()[i] = original - FD_STEP;
            let minus = loss_of(&perturbed, &noise)?;
            perturbed.tensor_mut(idx).data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[idx].data()[i];
            let denom = a.abs().max(numeric.abs());
            if denom >= BOTH_ZERO {
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
    }
    Ok(GradCheckResult {
        name: "hedge_end_to_end".to_string(),
        max_rel_err: worst,
    })
}
