//! Attack-ratio sweeps: perturb, retrain every model, measure.
//!
//! Each (ratio, seed) cell attacks the input graph, records the class
//! homophily variance before and after, retrains every configured model on
//! the attacked graph, and emits one metrics row per model. Ratio zero is a
//! plain training run on the untouched graph.

use serde::{Deserialize, Serialize};

use crate::attack::{self, AttackConfig, AttackKind};
use crate::error::Result;
use crate::graph::{make_split, MultiRelationGraph};
use crate::homophily::{class_homophily_variance, RelationView};
use crate::model::{
    train_baseline, train_hedge, BaselineConfig, BaselineModel, HedgeConfig, HedgeModel,
};

/// Default attack-ratio grid.
pub const DEFAULT_RATIOS: [f64; 6] = [0.0, 0.01, 0.03, 0.05, 0.07, 0.10];

fn default_ratios() -> Vec<f64> {
    DEFAULT_RATIOS.to_vec()
}

/// One model entry in a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SweepModel {
    Hedge(HedgeConfig),
    Baseline(BaselineConfig),
}

impl SweepModel {
    pub fn name(&self) -> String {
        match self {
            SweepModel::Hedge(_) => "hedge".to_string(),
            SweepModel::Baseline(cfg) => format!("{:?}", cfg.kind).to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Attack ratios to sweep; [`DEFAULT_RATIOS`] when omitted.
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub attack_kind: AttackKind,
    pub target_class: usize,
    #[serde(default)]
    pub relation: usize,
    pub split_ratios: (f64, f64, f64),
    pub models: Vec<SweepModel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub model: String,
    pub ratio: f64,
    pub seed: u64,
    pub auc: f64,
    pub ap: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChvRow {
    pub ratio: f64,
    pub seed: u64,
    pub chv_before: f64,
    pub chv_after: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub chv_rows: Vec<ChvRow>,
}

impl SweepReport {
    /// `model,ratio,seed,auc,ap,accuracy` rows, fixed order.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("model,ratio,seed,auc,ap,accuracy\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.model, c.ratio, c.seed, c.auc, c.ap, c.accuracy
            ));
        }
        out
    }

    /// `ratio,seed,chv_before,chv_after` rows, fixed order.
    pub fn chv_csv(&self) -> String {
        let mut out = String::from("ratio,seed,chv_before,chv_after\n");
        for r in &self.chv_rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.ratio, r.seed, r.chv_before, r.chv_after
            ));
        }
        out
    }

    /// Mean CHV after attack per ratio, in ratio order.
    pub fn mean_chv_by_ratio(&self) -> Vec<(f64, f64)> {
        let mut ratios: Vec<f64> = self.chv_rows.iter().map(|r| r.ratio).collect();
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ratios.dedup();
        ratios
            .into_iter()
            .map(|ratio| {
                let vals: Vec<f64> = self
                    .chv_rows
                    .iter()
                    .filter(|r| r.ratio == ratio)
                    .map(|r| r.chv_after)
                    .collect();
                (ratio, vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }
}

/// Runs the full sweep. Cell order is (ratio, seed, model), so outputs are
/// byte-stable for a fixed config.
pub fn attack_sweep(graph: &MultiRelationGraph, cfg: &SweepConfig) -> Result<SweepReport> {
    let chv_before = class_homophily_variance(graph, RelationView::Union)?.chv;
    let mut cells = Vec::new();
    let mut chv_rows = Vec::new();
    for &ratio in &cfg.ratios {
        for &seed in &cfg.seeds {
            let attacked = if ratio == 0.0 {
                graph.clone()
            } else {
                let attack_cfg = AttackConfig {
                    kind: cfg.attack_kind,
                    target_class: cfg.target_class,
                    ratio,
                    seed,
                    relation: cfg.relation,
                };
                attack::run_attack(graph, &attack_cfg)?.0
            };
            let chv_after = class_homophily_variance(&attacked, RelationView::Union)?.chv;
            chv_rows.push(ChvRow {
                ratio,
                seed,
                chv_before,
                chv_after,
            });
            let split = make_split(&attacked, cfg.split_ratios, seed)?;
            for model in &cfg.models {
                let report = match model {
                    SweepModel::Hedge(hedge_cfg) => {
                        let mut run_cfg = hedge_cfg.clone();
                        run_cfg.seed = seed;
                        let bound = HedgeModel::new(&attacked, run_cfg, &split)?;
                        train_hedge(&bound)?.report
                    }
                    SweepModel::Baseline(baseline_cfg) => {
                        let mut run_cfg = baseline_cfg.clone();
                        run_cfg.seed = seed;
                        let bound = BaselineModel::new(&attacked, run_cfg)?;
                        train_baseline(&bound, &split)?.report
                    }
                };
                cells.push(SweepCell {
                    model: model.name(),
                    ratio,
                    seed,
                    auc: report.auc,
                    ap: report.ap,
                    accuracy: report.accuracy,
                });
            }
        }
    }
    Ok(SweepReport { cells, chv_rows })
}
