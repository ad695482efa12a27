//! Subcommand implementations. Every run writes its fully resolved
//! configuration next to its outputs so it can be reproduced byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use hedge_core::attack::{run_attack, AttackConfig, AttackKind};
use hedge_core::csbm::{self, CsbmParams};
use hedge_core::eval::{attack_sweep, config_hash, SweepConfig};
use hedge_core::gradcheck;
use hedge_core::graph::{load_graph, make_split, save_graph, GraphFormat, SplitMask};
use hedge_core::homophily::{class_homophily_variance, weighted_density_curve, RelationView};
use hedge_core::model::{
    load_checkpoint, save_checkpoint, train_baseline, train_hedge, BaselineConfig, BaselineKind,
    BaselineModel, HedgeConfig, HedgeModel, TrainOutcome,
};
use hedge_core::{Error, MultiRelationGraph, Result};

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn parse_relation_view(arg: &str) -> Result<RelationView> {
    if arg == "union" {
        Ok(RelationView::Union)
    } else {
        arg.parse::<usize>().map(RelationView::Single).map_err(|_| {
            Error::validation(format!("relation must be 'union' or an index, got {arg:?}"))
        })
    }
}

pub fn analyze(graph_path: &str, relation: &str, bandwidth: Option<f64>, out: &str) -> Result<()> {
    let view = parse_relation_view(relation)?;
    let (graph, build_report) = load_graph(graph_path, GraphFormat::Json)?;
    if build_report.self_loops_dropped > 0 {
        eprintln!(
            "warning: dropped {} self-loop(s) on load",
            build_report.self_loops_dropped
        );
    }
    let profile = class_homophily_variance(&graph, view)?;
    let curve = weighted_density_curve(&graph, view, bandwidth)?;
    if curve.bandwidth_fallback {
        eprintln!(
            "warning: degenerate homophily sample; fell back to bandwidth {}",
            curve.bandwidth
        );
    }

    let out_dir = Path::new(out);
    ensure_dir(out_dir)?;
    let metrics = json!({
        "config": {
            "graph": graph_path,
            "relation": relation,
            "bandwidth": bandwidth,
        },
        "chv": profile.chv,
        "per_class_mean": profile.per_class_mean,
        "class_mean_average": profile.class_mean_average,
        "in_class_var": profile.in_class_var,
        "mean_in_class_var": profile.mean_in_class_var,
        "weighted_mean": profile.weighted_mean,
        "per_node": profile.per_node,
        "density_bandwidth": curve.bandwidth,
        "density_bandwidth_fallback": curve.bandwidth_fallback,
        "weights_note": curve.weights_note,
    });
    let metrics_text =
        serde_json::to_string_pretty(&metrics).map_err(|e| Error::validation(e.to_string()))?;
    write(&out_dir.join("metrics.json"), format!("{metrics_text}\n"))?;

    let mut density = String::from("h,density\n");
    for (h, d) in curve.grid.iter().zip(&curve.density) {
        density.push_str(&format!("{h},{d}\n"));
    }
    write(&out_dir.join("density.csv"), density)?;
    println!("{metrics_text}");
    Ok(())
}

fn parse_mean(arg: &str, name: &str) -> Result<Vec<f64>> {
    let parsed: std::result::Result<Vec<f64>, _> =
        arg.split(',').map(|x| x.trim().parse::<f64>()).collect();
    parsed.map_err(|_| {
        Error::validation(format!("{name} must be comma-separated reals, got {arg:?}"))
    })
}

#[allow(clippy::too_many_arguments)]
pub fn csbm_gen(
    mu0: &str,
    mu1: &str,
    d: usize,
    h0: f64,
    h1: f64,
    n: usize,
    seed: u64,
    out: &str,
) -> Result<()> {
    let params = CsbmParams {
        mu0: parse_mean(mu0, "mu0")?,
        mu1: parse_mean(mu1, "mu1")?,
        degree: d,
        h0,
        h1,
        n_per_class: n,
        seed,
    };
    let oracle = csbm::oracle(&params)?;
    let sample = csbm::generate(&params)?;
    let out_dir = Path::new(out);
    ensure_dir(out_dir)?;
    save_graph(&sample.graph, out_dir.join("graph.json"))?;
    let oracle_doc = json!({
        "params": params,
        "boundary_distance": oracle.boundary_distance,
        "theoretical_chv": oracle.theoretical_chv,
        "midpoint": oracle.midpoint,
        "direction": oracle.direction,
    });
    let text =
        serde_json::to_string_pretty(&oracle_doc).map_err(|e| Error::validation(e.to_string()))?;
    write(&out_dir.join("oracle.json"), format!("{text}\n"))?;
    println!("{text}");
    Ok(())
}

pub fn attack(
    kind: &str,
    target_class: usize,
    ratio: f64,
    seed: u64,
    relation: usize,
    input: &str,
    output: &str,
) -> Result<()> {
    let kind = match kind {
        "heterophily" => AttackKind::Heterophily,
        "random" => AttackKind::Random,
        other => return Err(Error::validation(format!("unknown attack kind {other:?}"))),
    };
    let (graph, _) = load_graph(input, GraphFormat::Json)?;
    let chv_of = |g: &MultiRelationGraph| -> Option<f64> {
        class_homophily_variance(g, RelationView::Union)
            .ok()
            .map(|p| p.chv)
    };
    let chv_before = chv_of(&graph);
    let cfg = AttackConfig {
        kind,
        target_class,
        ratio,
        seed,
        relation,
    };
    let (attacked, report) = run_attack(&graph, &cfg)?;
    let chv_after = chv_of(&attacked);
    save_graph(&attacked, output)?;
    let doc = json!({
        "config": cfg,
        "chv_before": chv_before,
        "chv_after": chv_after,
        "modifications": report.modifications,
        "removed": report.removed,
        "added": report.added,
        "edges_before": report.edges_before,
        "edges_after": report.edges_after,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).map_err(|e| Error::validation(e.to_string()))?
    );
    Ok(())
}

/// One JSON document configuring a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    /// "hedge", "gcn", "sage", or "mlp". When absent the `--model` flag
    /// decides (config file takes precedence over flags).
    pub model: Option<String>,
    pub split: SplitSpec,
    pub hedge: HedgeConfig,
    pub baseline: BaselineConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig {
            model: None,
            split: SplitSpec {
                ratios: (0.4, 0.3, 0.3),
                seed: 0,
            },
            hedge: HedgeConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl TrainRunConfig {
    /// Applies the precedence rule: the config file's `model` wins, then the
    /// command-line flag, then the default.
    pub fn resolve_model(&mut self, flag: Option<&str>) -> String {
        let resolved = self
            .model
            .clone()
            .or_else(|| flag.map(str::to_string))
            .unwrap_or_else(|| "hedge".to_string());
        self.model = Some(resolved.clone());
        resolved
    }
}

fn make_split_for(graph: &MultiRelationGraph, spec: &SplitSpec) -> Result<SplitMask> {
    make_split(graph, spec.ratios, spec.seed)
}

fn run_configured(
    model: &str,
    run_cfg: &TrainRunConfig,
    graph: &MultiRelationGraph,
    split: &SplitMask,
) -> Result<TrainOutcome> {
    match model {
        "hedge" => {
            let model = HedgeModel::new(graph, run_cfg.hedge.clone(), split)?;
            train_hedge(&model)
        }
        name @ ("gcn" | "sage" | "mlp") => {
            let mut cfg = run_cfg.baseline.clone();
            cfg.kind = match name {
                "gcn" => BaselineKind::Gcn,
                "sage" => BaselineKind::Sage,
                _ => BaselineKind::Mlp,
            };
            let model = BaselineModel::new(graph, cfg)?;
            train_baseline(&model, split)
        }
        other => Err(Error::validation(format!(
            "unknown model {other:?}; expected hedge, gcn, sage, or mlp"
        ))),
    }
}

pub fn train(
    config_path: &str,
    model_flag: Option<&str>,
    graph_path: &str,
    out: &str,
) -> Result<()> {
    let text = read_to_string(Path::new(config_path))?;
    let mut run_cfg: TrainRunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: config_path.to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let model = run_cfg.resolve_model(model_flag);
    run_cfg.hedge.validate()?;
    run_cfg.baseline.validate()?;
    let (graph, _) = load_graph(graph_path, GraphFormat::Json)?;
    let split = make_split_for(&graph, &run_cfg.split)?;

    let out_dir = Path::new(out);
    ensure_dir(out_dir)?;
    // Echo the fully resolved configuration (defaults filled in).
    let echo =
        serde_json::to_string_pretty(&run_cfg).map_err(|e| Error::validation(e.to_string()))?;
    write(&out_dir.join("config.json"), format!("{echo}\n"))?;

    let mut outcome = run_configured(&model, &run_cfg, &graph, &split)?;
    outcome.report.config_hash = config_hash(&run_cfg);

    let mut history = String::from("epoch,loss,cross_entropy,penalty,clamped,val_auc\n");
    for row in &outcome.history {
        history.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.epoch,
            row.loss,
            row.cross_entropy,
            row.penalty,
            row.clamped,
            row.val_auc.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    write(&out_dir.join("history.csv"), history)?;
    save_checkpoint(&outcome.best_params, out_dir)?;

    if let Some(edges) = &outcome.generated_edges {
        let mut body = String::new();
        for (i, j) in edges {
            body.push_str(&format!("{i}\t{j}\n"));
        }
        write(&out_dir.join("generated_edges.tsv"), body)?;
    }
    if let Some(embeddings) = &outcome.embeddings {
        let mut body = String::from("node");
        for c in 0..embeddings.cols() {
            body.push_str(&format!(",e{c}"));
        }
        body.push('\n');
        for v in 0..embeddings.rows() {
            body.push_str(&v.to_string());
            for x in embeddings.row(v) {
                body.push_str(&format!(",{x}"));
            }
            body.push('\n');
        }
        write(&out_dir.join("embeddings.csv"), body)?;
    }

    let report_text = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| Error::validation(e.to_string()))?;
    write(&out_dir.join("metrics.json"), format!("{report_text}\n"))?;
    println!("{report_text}");
    Ok(())
}

pub fn eval(run_dir: &str, graph_path: &str) -> Result<()> {
    let run_dir = Path::new(run_dir);
    let text = read_to_string(&run_dir.join("config.json"))?;
    let run_cfg: TrainRunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: run_dir.join("config.json").display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let (graph, _) = load_graph(graph_path, GraphFormat::Json)?;
    let split = make_split_for(&graph, &run_cfg.split)?;
    let params = load_checkpoint(run_dir)?;

    let model = run_cfg.model.clone().unwrap_or_else(|| "hedge".to_string());
    let probs = match model.as_str() {
        "hedge" => {
            let model = HedgeModel::new(&graph, run_cfg.hedge.clone(), &split)?;
            let mut tape = hedge_core::Tape::new();
            let ids = params.insert_leaves(&mut tape);
            let out = model.forward(
                &mut tape,
                &ids,
                &[],
                &[],
                hedge_core::model::EdgeMode::MapDecode,
            )?;
            out.probs
        }
        name @ ("gcn" | "sage" | "mlp") => {
            let mut cfg = run_cfg.baseline.clone();
            cfg.kind = match name {
                "gcn" => BaselineKind::Gcn,
                "sage" => BaselineKind::Sage,
                _ => BaselineKind::Mlp,
            };
            let model = BaselineModel::new(&graph, cfg)?;
            let mut tape = hedge_core::Tape::new();
            let ids = params.insert_leaves(&mut tape);
            let (_, probs) = model.forward(&mut tape, &ids, &[])?;
            probs
        }
        other => return Err(Error::validation(format!("unknown model {other:?}"))),
    };

    let nodes: &[usize] = if !split.test.is_empty() {
        &split.test
    } else {
        &split.train
    };
    let auc = hedge_core::model::train::auc_on_nodes(&probs, &graph, nodes)?;
    let doc = json!({
        "auc": auc,
        "nodes_evaluated": nodes.len(),
        "config_hash": config_hash(&run_cfg),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).map_err(|e| Error::validation(e.to_string()))?
    );
    Ok(())
}

pub fn gradcheck(seed: u64) -> Result<()> {
    let mut all_ok = true;
    for result in gradcheck::check_all_primitives(seed) {
        let ok = result.max_rel_err < gradcheck::PRIMITIVE_TOLERANCE;
        all_ok &= ok;
        println!(
            "primitive {:<20} max rel err {:.3e}  {}",
            result.name,
            result.max_rel_err,
            if ok { "ok" } else { "FAIL" }
        );
    }
    let e2e = gradcheck::check_hedge_end_to_end(seed)?;
    let ok = e2e.max_rel_err < gradcheck::END_TO_END_TOLERANCE;
    all_ok &= ok;
    println!(
        "end-to-end {:<20} max rel err {:.3e}  {}",
        e2e.name,
        e2e.max_rel_err,
        if ok { "ok" } else { "FAIL" }
    );
    if all_ok {
        Ok(())
    } else {
        Err(Error::numeric(
            "finite-difference gradient check exceeded tolerance",
        ))
    }
}

pub fn sweep(config_path: &str, graph_path: &str, out: &str) -> Result<()> {
    let text = read_to_string(Path::new(config_path))?;
    let cfg: SweepConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: config_path.to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let (graph, _) = load_graph(graph_path, GraphFormat::Json)?;
    let report = attack_sweep(&graph, &cfg)?;
    let out_dir = Path::new(out);
    ensure_dir(out_dir)?;
    let echo = serde_json::to_string_pretty(&cfg).map_err(|e| Error::validation(e.to_string()))?;
    write(&out_dir.join("config.json"), format!("{echo}\n"))?;
    write(&out_dir.join("metrics_vs_ratio.csv"), report.metrics_csv())?;
    write(&out_dir.join("chv_vs_ratio.csv"), report.chv_csv())?;
    println!("{}", report.metrics_csv());
    Ok(())
}
