//! Training loops for backbone pre-training and adaptor fine-tuning.
//!
//! Batches are drawn with replacement from a per-step substream; per-sample
//! losses and gradients are computed in parallel (read-only model state) and
//! reduced in slot order, so a (config, seed, dataset) triple reproduces
//! checkpoints bit-exactly regardless of thread scheduling.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::adaptors::{AdaptorBranch, AdaptorVariant};
use crate::backbone::{Backbone, BackboneConfig};
use crate::error::{Error, Result};
use crate::numerics::optim::{LrSchedule, OptimizerState};
use crate::numerics::rng::RngKey;
use crate::numerics::tape::{Gradients, Tape};
use crate::numerics::tensor::{ParamStore, Tensor};
use crate::numerics::Real;

use super::config::TrainConfig;
use super::dropout::DropoutMask;
use super::loss::{sample_loss, sample_noise_level, TrainItem};

#[derive(Clone, Copy, Debug)]
pub struct LogRow {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "step,lr,loss,wall_ms")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.step, r.lr, r.loss, r.wall_ms)?;
        }
        Ok(())
    }

    pub fn mean_loss_first(&self, n: usize) -> f64 {
        let k = n.min(self.rows.len());
        self.rows[..k].iter().map(|r| r.loss).sum::<f64>() / k as f64
    }

    pub fn mean_loss_last(&self, n: usize) -> f64 {
        let k = n.min(self.rows.len());
        self.rows[self.rows.len() - k..].iter().map(|r| r.loss).sum::<f64>() / k as f64
    }
}

struct StepSpec {
    idx: usize,
    sigma: f64,
    mask: DropoutMask,
    noise_key: RngKey,
}

fn draw_step_specs(
    step_key: RngKey,
    dataset_len: usize,
    config: &TrainConfig,
) -> Vec<StepSpec> {
    let mut draw = step_key.stream();
    (0..config.batch_size)
        .map(|slot| {
            let idx = draw.below(dataset_len);
            let sigma = sample_noise_level(&mut draw, config.p_mean, config.p_std);
            let mask = DropoutMask::draw(&mut draw, config);
            StepSpec { idx, sigma, mask, noise_key: step_key.child(1000 + slot as u64) }
        })
        .collect()
}

/// Parallel per-sample forward/backward; results come back in slot order.
fn step_losses<R: Real>(
    backbone: &Backbone<R>,
    branch: Option<&AdaptorBranch<R>>,
    trainable_tag: u32,
    dataset: &[TrainItem<R>],
    specs: &[StepSpec],
) -> Result<Vec<(f64, Gradients<R>)>> {
    specs
        .par_iter()
        .map(|spec| {
            let item = &dataset[spec.idx];
            let noise = Tensor::randn(item.latent.shape(), 1.0, &mut spec.noise_key.stream());
            let mut tape = Tape::new();
            tape.mark_trainable(trainable_tag);
            let loss =
                sample_loss(&mut tape, backbone, branch, item, spec.mask, spec.sigma, &noise)?;
            let value = tape.value(loss)[0].to_f64();
            let grads = tape.backward(loss)?;
            Ok((value, grads))
        })
        .collect()
}

/// Deterministic reduction, clipping, and one optimizer update.
fn apply_step<R: Real>(
    store: &mut ParamStore<R>,
    opt: &mut OptimizerState<R>,
    results: &[(f64, Gradients<R>)],
    clip_norm: f64,
    lr: f64,
    step: u64,
) -> Result<f64> {
    let batch = results.len();
    let mut loss_sum = 0.0;
    for (v, _) in results {
        loss_sum += v;
    }
    let loss = loss_sum / batch as f64;
    if !loss.is_finite() {
        return Err(Error::Train(format!("loss became non-finite at step {step}: {loss}")));
    }
    let scale = R::of(1.0 / batch as f64);
    for (_, g) in results {
        g.accumulate_into(store, scale)?;
    }
    let norm = store.grad_norm();
    if !norm.is_finite() {
        return Err(Error::Train(format!("gradient norm non-finite at step {step}")));
    }
    if clip_norm > 0.0 && norm > clip_norm {
        store.scale_grads(R::of(clip_norm / norm));
    }
    opt.step(store, lr)?;
    store.zero_grads();
    Ok(loss)
}

/// Pre-trains a denoiser from scratch on the dataset. The condition map of
/// items is ignored; context and style dropout applies.
pub fn train_backbone<R: Real>(
    backbone_config: &BackboneConfig,
    config: &TrainConfig,
    dataset: &[TrainItem<R>],
    seed: u64,
) -> Result<(Backbone<R>, TrainLog)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Contract("training needs a non-empty dataset".into()));
    }
    let mut backbone = Backbone::new(backbone_config.clone(), seed)?;
    let schedule = LrSchedule::new(config.base_lr, config.warmup_steps, config.steps, config.min_lr)?;
    let mut opt = OptimizerState::new(&backbone.params, config.adamw());
    let key = RngKey::root(seed).child(2);
    let mut log = TrainLog::default();
    for step in 0..config.steps {
        let t0 = Instant::now();
        let specs = draw_step_specs(key.child(step), dataset.len(), config);
        let bare: Vec<StepSpec> = specs
            .into_iter()
            .map(|mut s| {
                s.mask.keep_c = true; // no condition map in backbone training
                s
            })
            .collect();
        let results = step_losses(&backbone, None, backbone.params.tag(), dataset, &bare)?;
        let lr = schedule.lr_at(step);
        let loss = apply_step(&mut backbone.params, &mut opt, &results, config.clip_norm, lr, step)?;
        log.rows.push(LogRow { step, lr, loss, wall_ms: t0.elapsed().as_secs_f64() * 1e3 });
    }
    Ok((backbone, log))
}

/// Fine-tunes an adaptor branch against a frozen backbone. Only branch
/// parameters receive gradients or optimizer updates.
pub fn train_adaptor<R: Real>(
    backbone: &Backbone<R>,
    variant: AdaptorVariant,
    cond_channels: usize,
    config: &TrainConfig,
    dataset: &[TrainItem<R>],
    seed: u64,
) -> Result<(AdaptorBranch<R>, TrainLog)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Contract("training needs a non-empty dataset".into()));
    }
    if dataset.iter().any(|item| item.condition.is_none()) {
        return Err(Error::Contract("adaptor training needs condition maps".into()));
    }
    let mut branch = AdaptorBranch::new(backbone, variant, cond_channels, seed)?;
    let schedule = LrSchedule::new(config.base_lr, config.warmup_steps, config.steps, config.min_lr)?;
    let mut opt = OptimizerState::new(&branch.params, config.adamw());
    let key = RngKey::root(seed).child(3);
    let mut log = TrainLog::default();
    for step in 0..config.steps {
        let t0 = Instant::now();
        let specs = draw_step_specs(key.child(step), dataset.len(), config);
        let results = step_losses(backbone, Some(&branch), branch.params.tag(), dataset, &specs)?;
        let lr = schedule.lr_at(step);
        let loss = apply_step(&mut branch.params, &mut opt, &results, config.clip_norm, lr, step)?;
        log.rows.push(LogRow { step, lr, loss, wall_ms: t0.elapsed().as_secs_f64() * 1e3 });
    }
    Ok((branch, log))
}
