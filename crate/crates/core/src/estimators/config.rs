use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Cross-entropy family of the contrastive loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFamily {
    /// Rank the positive among N candidates with a row softmax.
    Categorical,
    /// Classify each candidate independently with a sigmoid.
    Binary,
}

/// How bootstrapped importance weights are formed from target critic values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Self-normalized over the batch: W = N * row-softmax(F_w).
    SoftmaxNormalized,
    /// Raw exponentials exp(F_w), clamped for overflow safety.
    ExpUnnormalized,
}

/// How many candidate future states each anchor is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativesScheme {
    /// Every anchor scores all N batch futures: N^2 pairs per batch.
    NSquared,
    /// Every anchor scores only its own row's future: N pairs per batch.
    N,
}

/// Hyperparameters shared by all learned occupancy estimators.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub loss_family: LossFamily,
    pub weight_scheme: WeightScheme,
    pub negatives_scheme: NegativesScheme,
    pub batch_size: usize,
    pub repr_dim: usize,
    pub learning_rate: f64,
    pub ema_tau: f64,
    pub normalized: bool,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            loss_family: LossFamily::Categorical,
            weight_scheme: WeightScheme::SoftmaxNormalized,
            negatives_scheme: NegativesScheme::NSquared,
            batch_size: 64,
            repr_dim: 16,
            learning_rate: 0.5,
            ema_tau: 0.05,
            normalized: false,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch_size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if self.repr_dim == 0 {
            return Err(Error::InvalidConfig("repr_dim must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.ema_tau > 0.0 && self.ema_tau <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ema_tau must lie in (0, 1], got {}",
                self.ema_tau
            )));
        }
        Ok(())
    }
}
