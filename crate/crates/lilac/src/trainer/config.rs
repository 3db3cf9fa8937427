//! Training configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::optim::AdamWConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: u64,
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub min_lr: f64,
    /// Independent per-sample drop probabilities for the three conditions.
    pub dropout_context: f64,
    pub dropout_e: f64,
    pub dropout_c: f64,
    /// Log-normal noise-level sampling: sigma = exp(p_mean + p_std * z).
    pub p_mean: f64,
    pub p_std: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            steps: 2000,
            base_lr: 1e-4,
            warmup_steps: 100,
            min_lr: 0.0,
            dropout_context: 0.5,
            dropout_e: 0.5,
            dropout_c: 0.5,
            p_mean: -1.2,
            p_std: 1.2,
            weight_decay: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("dropout_context", self.dropout_context),
            ("dropout_e", self.dropout_e),
            ("dropout_c", self.dropout_c),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.steps <= self.warmup_steps {
            return Err(Error::Config(format!(
                "steps {} must exceed warmup_steps {}",
                self.steps, self.warmup_steps
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.p_std <= 0.0 {
            return Err(Error::Config("p_std must be positive".into()));
        }
        Ok(())
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            base_lr: self.base_lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_probabilities_and_steps() {
        let mut c = TrainConfig { dropout_c: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
        c.dropout_c = 0.5;
        c.steps = 50;
        assert!(c.validate().is_err());
    }
}
