//! Behavioral checks of the trained models: capacity, baseline regimes,
//! attack sweeps, and the gradient suite shared by the baselines.

#![allow(clippy::needless_range_loop)]

use hedge_core::attack::AttackKind;
use hedge_core::csbm::{self, CsbmParams};
use hedge_core::eval::{attack_sweep, SweepConfig, SweepModel};
use hedge_core::gradcheck::{finite_difference, relative_error, FD_STEP};
use hedge_core::graph::make_split;
use hedge_core::model::{
    train_baseline, train_hedge, BaselineConfig, BaselineKind, BaselineModel, HedgeConfig,
    HedgeModel,
};
use hedge_core::{MultiRelationGraph, Tape};

fn csbm_graph(mu: f64, d: usize, h0: f64, h1: f64, n: usize, seed: u64) -> MultiRelationGraph {
    csbm::generate(&CsbmParams {
        mu0: vec![mu, 0.0],
        mu1: vec![-mu, 0.0],
        degree: d,
        h0,
        h1,
        n_per_class: n,
        seed,
    })
    .unwrap()
    .graph
}

#[test]
fn overfit_capacity_on_a_twelve_node_graph() {
    // With every labeled node in the train split, 500 epochs drive the
    // training AUC to 1.
    let graph = csbm::generate(&CsbmParams {
        mu0: vec![0.8, 0.0],
        mu1: vec![-0.8, 0.4],
        degree: 2,
        h0: 1.0,
        h1: 0.5,
        n_per_class: 6,
        seed: 5,
    })
    .unwrap()
    .graph;
    let split = make_split(&graph, (1.0, 0.0, 0.0), 5).unwrap();
    let cfg = HedgeConfig {
        seed: 5,
        epochs: 500,
        hidden_dim: 8,
        k_pe: 1,
        learning_rate: 0.03,
        downsample_ratio: 0.5,
        ..HedgeConfig::default()
    };
    let model = HedgeModel::new(&graph, cfg, &split).unwrap();
    let outcome = train_hedge(&model).unwrap();
    assert_eq!(
        outcome.report.auc, 1.0,
        "training AUC {}",
        outcome.report.auc
    );
}

#[test]
fn gcn_excels_in_the_easy_homophilic_regime() {
    // Fully homophilic neighborhoods with well-separated means: the
    // baseline's test AUC clears 0.9 comfortably.
    let graph = csbm_graph(1.0, 10, 1.0, 1.0, 100, 31);
    let split = make_split(&graph, (0.4, 0.3, 0.3), 31).unwrap();
    let cfg = BaselineConfig {
        seed: 31,
        epochs: 100,
        ..BaselineConfig::default()
    };
    let model = BaselineModel::new(&graph, cfg).unwrap();
    let outcome = train_baseline(&model, &split).unwrap();
    assert!(outcome.report.auc > 0.9, "AUC {}", outcome.report.auc);
}

#[test]
fn gcn_degrades_when_class_homophily_levels_split() {
    // Mean test AUC over 5 seeds: opposed homophily levels (high CHV, the
    // aggregated class means coincide) score below the equal-level control.
    let mut control = 0.0;
    let mut high_chv = 0.0;
    let seeds = 5;
    for seed in 0..seeds {
        for (h0, h1, acc) in [(0.95, 0.95, &mut control), (0.95, 0.05, &mut high_chv)] {
            let graph = csbm_graph(0.4, 20, h0, h1, 200, 500 + seed);
            let split = make_split(&graph, (0.4, 0.3, 0.3), seed).unwrap();
            let cfg = BaselineConfig {
                seed,
                epochs: 100,
                ..BaselineConfig::default()
            };
            let model = BaselineModel::new(&graph, cfg).unwrap();
            *acc += train_baseline(&model, &split).unwrap().report.auc / seeds as f64;
        }
    }
    assert!(
        high_chv < control,
        "high-CHV mean {high_chv} vs control mean {control}"
    );
}

#[test]
fn baseline_losses_pass_central_finite_differences() {
    // The baselines ride the same primitives as the main model; check their
    // composed losses end to end on a small graph.
    let graph = csbm_graph(0.8, 2, 1.0, 0.5, 6, 9);
    let split = make_split(&graph, (0.5, 0.25, 0.25), 9).unwrap();
    for kind in [BaselineKind::Gcn, BaselineKind::Sage, BaselineKind::Mlp] {
        let cfg = BaselineConfig {
            kind,
            seed: 9,
            hidden_dim: 4,
            beta: 0.05,
            ..BaselineConfig::default()
        };
        let model = BaselineModel::new(&graph, cfg).unwrap();
        let params = model.init_params();
        let subset = split.train.clone();

        let mut tape = Tape::new();
        let ids = params.insert_leaves(&mut tape);
        let (loss, _) = model.forward(&mut tape, &ids, &subset).unwrap();
        tape.backward(loss.unwrap()).unwrap();
        let analytic = params.collect_grads(&tape, &ids);

        let inputs: Vec<hedge_core::Tensor> = (0..params.len())
            .map(|i| params.tensor(i).clone())
            .collect();
        let mut forward = |values: &[hedge_core::Tensor]| -> f64 {
            let mut probe = hedge_core::model::ParamSet::new();
            for (i, v) in values.iter().enumerate() {
                probe.add(params.name(i), v.clone());
            }
            let mut tape = Tape::new();
            let ids = probe.insert_leaves(&mut tape);
            let (loss, _) = model.forward(&mut tape, &ids, &subset).unwrap();
            tape.value(loss.unwrap()).item()
        };
        for arg in 0..inputs.len() {
            let numeric = finite_difference(&mut forward, &inputs, arg);
            let err = relative_error(&analytic[arg], &numeric);
            assert!(
                err < 1e-6,
                "{kind:?} {}: rel err {err} (step {FD_STEP})",
                params.name(arg)
            );
        }
    }
}

fn sweep_fixture() -> (MultiRelationGraph, SweepConfig) {
    // Attack-sensitive operating point: low degree and weak features, so a
    // 10% heterophily perturbation visibly dents the plain baseline.
    let graph = csbm_graph(0.4, 4, 0.75, 0.75, 100, 42);
    let cfg = SweepConfig {
        ratios: vec![0.0, 0.1],
        seeds: vec![0, 1, 2, 3, 4],
        attack_kind: AttackKind::Heterophily,
        target_class: 0,
        relation: 0,
        split_ratios: (0.4, 0.3, 0.3),
        models: vec![
            SweepModel::Hedge(HedgeConfig {
                epochs: 200,
                ..HedgeConfig::default()
            }),
            SweepModel::Baseline(BaselineConfig {
                epochs: 150,
                ..BaselineConfig::default()
            }),
        ],
    };
    (graph, cfg)
}

#[test]
fn sweep_orders_models_and_raises_chv() {
    let (graph, cfg) = sweep_fixture();
    let report = attack_sweep(&graph, &cfg).unwrap();

    // CHV after attack is non-decreasing in the ratio.
    let chv = report.mean_chv_by_ratio();
    for pair in chv.windows(2) {
        assert!(
            pair[0].1 <= pair[1].1 + 1e-12,
            "CHV trend violated: {chv:?}"
        );
    }

    // At the top attack ratio the edge-generating model's mean accuracy
    // stays at or above the baseline's.
    let mean_of = |model: &str, ratio: f64| {
        let vals: Vec<f64> = report
            .cells
            .iter()
            .filter(|c| c.model == model && c.ratio == ratio)
            .map(|c| c.accuracy)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let hedge_acc = mean_of("hedge", 0.1);
    let gcn_acc = mean_of("gcn", 0.1);
    assert!(
        hedge_acc >= gcn_acc,
        "hedge {hedge_acc} vs gcn {gcn_acc} at ratio 0.1"
    );
}

#[test]
fn three_class_mode_trains_with_k_way_softmax() {
    // The pipeline generalizes past the binary case: labels in {0,1,2},
    // label codes use 3 as "unknown", metrics fall back to macro
    // one-vs-rest averages.
    use hedge_core::rng;
    let n = 60;
    let labels: Vec<Option<usize>> = (0..n).map(|v| Some(v % 3)).collect();
    let mut rng = rng::seeded(8);
    let mut features = hedge_core::Tensor::zeros(n, 2);
    for v in 0..n {
        let angle = (v % 3) as f64 * 2.0 * std::f64::consts::PI / 3.0;
        features.set(v, 0, angle.cos() + 0.3 * rng::standard_normal(&mut rng));
        features.set(v, 1, angle.sin() + 0.3 * rng::standard_normal(&mut rng));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            use rand::Rng;
            let p = if i % 3 == j % 3 { 0.2 } else { 0.02 };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = MultiRelationGraph::build(n, vec![edges], features, labels, 3)
        .unwrap()
        .0;
    let split = make_split(&graph, (0.5, 0.25, 0.25), 8).unwrap();
    let cfg = HedgeConfig {
        seed: 8,
        epochs: 60,
        hidden_dim: 8,
        k_pe: 1,
        ..HedgeConfig::default()
    };
    let model = HedgeModel::new(&graph, cfg, &split).unwrap();
    let outcome = train_hedge(&model).unwrap();
    assert!((0.0..=1.0).contains(&outcome.report.auc));
    assert!(
        outcome.report.accuracy > 1.0 / 3.0,
        "accuracy {} no better than chance",
        outcome.report.accuracy
    );
    assert_eq!(outcome.probs.cols(), 3);
}

#[test]
fn zero_ratio_sweep_cell_equals_a_plain_run() {
    let graph = csbm_graph(0.8, 4, 0.75, 0.75, 40, 7);
    let quick = BaselineConfig {
        epochs: 20,
        seed: 3,
        ..BaselineConfig::default()
    };
    let cfg = SweepConfig {
        ratios: vec![0.0],
        seeds: vec![3],
        attack_kind: AttackKind::Heterophily,
        target_class: 0,
        relation: 0,
        split_ratios: (0.5, 0.25, 0.25),
        models: vec![SweepModel::Baseline(quick.clone())],
    };
    let report = attack_sweep(&graph, &cfg).unwrap();
    let cell = &report.cells[0];

    let split = make_split(&graph, (0.5, 0.25, 0.25), 3).unwrap();
    let model = BaselineModel::new(&graph, quick).unwrap();
    let direct = train_baseline(&model, &split).unwrap();
    assert_eq!(cell.auc, direct.report.auc);
    assert_eq!(cell.ap, direct.report.ap);
    assert_eq!(cell.accuracy, direct.report.accuracy);
}
