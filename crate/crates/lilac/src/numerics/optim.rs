//! AdamW with decoupled weight decay, and the warmup-cosine schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::real::Real;
use crate::numerics::tensor::ParamStore;

/// AdamW hyperparameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { base_lr: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 1e-3 }
    }
}

/// First/second moment buffers for every parameter of one store.
pub struct OptimizerState<R: Real> {
    pub config: AdamWConfig,
    step: u64,
    m: Vec<Vec<R>>,
    v: Vec<Vec<R>>,
}

impl<R: Real> OptimizerState<R> {
    pub fn new(store: &ParamStore<R>, config: AdamWConfig) -> Self {
        let m = (0..store.len()).map(|i| vec![R::ZERO; store.tensor_at(i).numel()]).collect();
        let v = (0..store.len()).map(|i| vec![R::ZERO; store.tensor_at(i).numel()]).collect();
        OptimizerState { config, step: 0, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One AdamW update from the gradients currently held in the store.
    ///
    /// Decay is decoupled: p <- p*(1 - lr*wd) - lr*mhat/(sqrt(vhat)+eps).
    pub fn step(&mut self, store: &mut ParamStore<R>, lr: f64) -> Result<()> {
        if lr < 0.0 {
            return Err(Error::Domain(format!("learning rate {lr} must be >= 0")));
        }
        if self.m.len() != store.len() {
            return Err(Error::Dimension("optimizer state does not match store".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let b1 = R::of(self.config.beta1);
        let b2 = R::of(self.config.beta2);
        let eps = R::of(self.config.epsilon);
        let bias1 = R::ONE - b1.powi(t);
        let bias2 = R::ONE - b2.powi(t);
        let lr_r = R::of(lr);
        let decay = R::ONE - lr_r * R::of(self.config.weight_decay);

        for idx in 0..store.len() {
            let tensor = store.tensor_at_mut(idx);
            let n = tensor.numel();
            if self.m[idx].len() != n {
                return Err(Error::Dimension(format!(
                    "moment buffer {idx} has {} entries, parameter has {n}",
                    self.m[idx].len()
                )));
            }
            let grad = match tensor.grad() {
                Some(g) => g.to_vec(),
                None => continue,
            };
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            let data = tensor.data_mut();
            for i in 0..n {
                let g = grad[i];
                m[i] = b1 * m[i] + (R::ONE - b1) * g;
                v[i] = b2 * v[i] + (R::ONE - b2) * g * g;
                let mhat = m[i] / bias1;
                let vhat = v[i] / bias2;
                data[i] = data[i] * decay - lr_r * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Linear warmup to `base_lr`, then cosine annealing to `min_lr`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub min_lr: f64,
}

impl LrSchedule {
    pub fn new(base_lr: f64, warmup_steps: u64, total_steps: u64, min_lr: f64) -> Result<Self> {
        if total_steps <= warmup_steps {
            return Err(Error::Config(format!(
                "total_steps {total_steps} must exceed warmup_steps {warmup_steps}"
            )));
        }
        if min_lr < 0.0 || base_lr < 0.0 {
            return Err(Error::Config("learning rates must be non-negative".into()));
        }
        Ok(LrSchedule { base_lr, warmup_steps, total_steps, min_lr })
    }

    /// Learning rate at `step`; steps past the end clamp to `min_lr`.
    pub fn lr_at(&self, step: u64) -> f64 {
        if step < self.warmup_steps {
            return self.base_lr * step as f64 / self.warmup_steps as f64;
        }
        if step > self.total_steps {
            return self.min_lr;
        }
        let progress =
            (step - self.warmup_steps) as f64 / (self.total_steps - self.warmup_steps) as f64;
        self.min_lr
            + 0.5 * (self.base_lr - self.min_lr) * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}
