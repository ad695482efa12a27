//! The edge-generating attention model, its positional encodings, companion
//! baselines, and the shared training loop.

pub mod baselines;
pub mod hedge;
pub mod optim;
pub mod params;
pub mod pe;
pub mod train;

pub use baselines::{BaselineConfig, BaselineKind, BaselineModel};
pub use hedge::{EdgeMode, ForwardOutput, HedgeModel, LayerNoise};
pub use params::{load_checkpoint, save_checkpoint, ParamSet};
pub use train::{train_baseline, train_hedge, EpochRecord, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aggregator applied to the original relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    /// Mean over the node and its neighbors, then a linear map.
    Sage,
    /// Symmetric degree-normalized aggregation without self-loops.
    Gcn,
}

/// All hyperparameters of one model run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HedgeConfig {
    /// Number of stacked layers.
    pub layers: usize,
    pub hidden_dim: usize,
    /// Laplacian eigenvectors kept per relation.
    pub k_pe: usize,
    /// Gumbel-Softmax temperature.
    pub tau: f64,
    /// Edge-count control: the per-pair edge probability is the clamped
    /// `lambda_edge * a_ij`.
    pub lambda_edge: f64,
    /// Weight of the cross-class attention penalty.
    pub alpha: f64,
    /// Weight of the squared-norm regularizer over all parameters.
    pub beta: f64,
    pub original_aggregator: Aggregator,
    pub seed: u64,
    /// Fraction of the train split drawn (class-balanced) each epoch.
    pub downsample_ratio: f64,
    /// Drop the original-relation branch and classify from generated edges
    /// and attention alone.
    pub edgeless: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Validation cadence in epochs.
    pub eval_every: usize,
}

impl Default for HedgeConfig {
    fn default() -> Self {
        HedgeConfig {
            layers: 1,
            hidden_dim: 16,
            k_pe: 2,
            tau: 1.0,
            lambda_edge: 4.0,
            alpha: 1.0,
            beta: 1e-3,
            original_aggregator: Aggregator::Sage,
            seed: 0,
            downsample_ratio: 0.5,
            edgeless: false,
            epochs: 200,
            learning_rate: 0.01,
            eval_every: 10,
        }
    }
}

impl HedgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::validation("layers must be >= 1"));
        }
        if self.hidden_dim == 0 {
            return Err(Error::validation("hidden_dim must be >= 1"));
        }
        if self.tau <= 0.0 || !self.tau.is_finite() {
            return Err(Error::validation(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.lambda_edge <= 0.0 || !self.lambda_edge.is_finite() {
            return Err(Error::validation(format!(
                "lambda_edge must be positive, got {}",
                self.lambda_edge
            )));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::validation(format!(
                "alpha and beta must be nonnegative, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        if !(0.0 < self.downsample_ratio && self.downsample_ratio <= 1.0) {
            return Err(Error::validation(format!(
                "downsample_ratio must be in (0, 1], got {}",
                self.downsample_ratio
            )));
        }
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be >= 1"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::validation(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::validation("eval_every must be >= 1"));
        }
        Ok(())
    }
}

/// Node-count ceiling for the dense all-pairs attention path.
pub const MAX_DENSE_NODES: usize = 2000;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        HedgeConfig::default().validate().unwrap();
    }

    #[test]
    fn negative_tau_is_named() {
        let cfg = HedgeConfig {
            tau: -1.0,
            ..HedgeConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");
    }
}
