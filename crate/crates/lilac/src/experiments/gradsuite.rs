//! The standard gradient-verification suite: finite-difference checks of the
//! primitive kernels, a full block, and the complete wrapped-branch training
//! loss on a two-level toy model. Shared by the CLI and the acceptance tests.

use crate::adaptors::{AdaptorBranch, AdaptorVariant};
use crate::backbone::{Backbone, BackboneConfig, GroupNormLayer, ResBlock};
use crate::error::Result;
use crate::numerics::gradcheck::{grad_check, grad_check_with, GradCheckReport};
use crate::numerics::rng::RngKey;
use crate::numerics::tensor::{ParamStore, Tensor};
use crate::trainer::{sample_loss, DropoutMask, TrainItem};

pub const FD_EPS: f64 = 1e-5;

/// Two-level toy model used by the branch-loss check.
pub fn toy_backbone_config() -> BackboneConfig {
    BackboneConfig {
        latent_channels: 12,
        levels: vec![8, 16],
        blocks_per_level: 1,
        embed_dim: 16,
        context_channels: 12,
        num_styles: 2,
        frame_rate_hz: 11.7,
    }
}

fn randomize(store: &mut ParamStore<f64>, key: RngKey, scale: f64) {
    let mut stream = key.stream();
    for idx in 0..store.len() {
        for v in store.tensor_at_mut(idx).data_mut() {
            *v += scale * stream.normal();
        }
    }
}

fn check_conv() -> Result<GradCheckReport> {
    let mut stream = RngKey::root(201).stream();
    let mut ps = ParamStore::new();
    let x = ps.register("x", Tensor::randn(&[3, 8], 1.0, &mut stream))?;
    let w = ps.register("w", Tensor::randn(&[4, 3, 3], 0.5, &mut stream))?;
    let b = ps.register("b", Tensor::randn(&[4], 0.5, &mut stream))?;
    grad_check(&mut ps, FD_EPS, |store, tape| {
        let xv = tape.param(store, x);
        let wv = tape.param(store, w);
        let bv = tape.param(store, b);
        let y = tape.conv1d(xv, wv, bv, 1)?;
        let a = tape.silu(y);
        Ok(tape.sum_all(a))
    })
}

fn check_group_norm() -> Result<GradCheckReport> {
    let mut stream = RngKey::root(202).stream();
    let mut ps = ParamStore::new();
    let x = ps.register("x", Tensor::randn(&[6, 5], 1.0, &mut stream))?;
    let layer = GroupNormLayer::new(&mut ps, "gn", 6)?;
    randomize(&mut ps, RngKey::root(203), 0.1);
    grad_check(&mut ps, FD_EPS, move |store, tape| {
        let xv = tape.param(store, x);
        let y = layer.forward(tape, store, xv)?;
        let a = tape.silu(y);
        let sq = tape.mul(a, a)?;
        Ok(tape.mean_all(sq))
    })
}

fn check_res_block() -> Result<GradCheckReport> {
    let mut stream = RngKey::root(204).stream();
    let mut ps = ParamStore::new();
    let x = ps.register("x", Tensor::randn(&[6, 6], 1.0, &mut stream))?;
    let e = ps.register("e", Tensor::randn(&[8], 1.0, &mut stream))?;
    let block = ResBlock::new(&mut ps, "rb", 6, 8, &mut stream)?;
    randomize(&mut ps, RngKey::root(205), 0.1);
    grad_check(&mut ps, FD_EPS, move |store, tape| {
        let xv = tape.param(store, x);
        let ev = tape.param(store, e);
        let y = block.forward(tape, store, xv, ev)?;
        let sq = tape.mul(y, y)?;
        Ok(tape.mean_all(sq))
    })
}

fn check_branch_loss(variant: AdaptorVariant) -> Result<GradCheckReport> {
    let mut backbone = Backbone::<f64>::new(toy_backbone_config(), 11)?;
    randomize(&mut backbone.params, RngKey::root(206), 0.1);
    let mut branch = AdaptorBranch::new(&backbone, variant, 12, 13)?;
    // Move the branch off its exact identity/zero initialization so the
    // check exercises generic weights.
    randomize(&mut branch.params, RngKey::root(207), 0.05);
    let mut stream = RngKey::root(208).stream();
    let item = TrainItem {
        latent: Tensor::randn(&[12, 8], 0.5, &mut stream),
        style: 1,
        context: Tensor::randn(&[12, 8], 0.5, &mut stream),
        condition: Some(Tensor::randn(&[12, 8], 0.4, &mut stream)),
    };
    let noise = Tensor::randn(&[12, 8], 1.0, &mut stream);
    let sigma = 0.6;
    let mut ctx = (backbone, branch, item, noise);
    grad_check_with(
        &mut ctx,
        |c| &mut c.1.params,
        move |c, tape| {
            sample_loss(tape, &c.0, Some(&c.1), &c.2, DropoutMask::KEEP_ALL, sigma, &c.3)
        },
        FD_EPS,
    )
}

/// Identity-initialized head: gradient of sum(output) w.r.t. the head conv
/// weights, straight from initialization.
fn check_identity_head_grad() -> Result<GradCheckReport> {
    let mut backbone = Backbone::<f64>::new(toy_backbone_config(), 17)?;
    randomize(&mut backbone.params, RngKey::root(209), 0.1);
    let branch = AdaptorBranch::new(&backbone, AdaptorVariant::h(), 12, 19)?;
    let mut stream = RngKey::root(210).stream();
    let x = Tensor::randn(&[12, 8], 0.7, &mut stream);
    let c = Tensor::randn(&[12, 8], 0.4, &mut stream);
    let mut ctx = (backbone, branch, x, c);
    grad_check_with(
        &mut ctx,
        |c| &mut c.1.params,
        |c, tape| {
            let (xv, e, ctx_var, _) =
                c.0.denoise_inputs(tape, &c.2, 0.5, crate::backbone::StyleCond::Style(0), None)?;
            let x_in = tape.scalar_mul(xv, c.0.precond.c_in(0.5));
            let cv = tape.constant(&c.3);
            let deltas = c.1.adaptor_forward(tape, &c.0, x_in, cv, &e, ctx_var)?;
            let mut total = tape.constant(&Tensor::scalar(0.0));
            for d in deltas {
                let s = tape.sum_all(d);
                total = tape.add(total, s)?;
            }
            Ok(total)
        },
        FD_EPS,
    )
}

/// Runs every check; returns (name, max relative error) pairs.
pub fn standard_grad_checks() -> Result<Vec<(String, f64)>> {
    let mut results = Vec::new();
    results.push(("conv1d".to_string(), check_conv()?.max_rel_err));
    results.push(("group_norm".to_string(), check_group_norm()?.max_rel_err));
    results.push(("res_block".to_string(), check_res_block()?.max_rel_err));
    results.push((
        "lilac_htr_loss".to_string(),
        check_branch_loss(AdaptorVariant::htr())?.max_rel_err,
    ));
    results.push(("identity_head_grad".to_string(), check_identity_head_grad()?.max_rel_err));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controlnet_branch_loss_matches_fd_too() {
        let report = check_branch_loss(AdaptorVariant::controlnet()).unwrap();
        assert!(report.max_rel_err <= 1e-4, "rel err {} at {:?}", report.max_rel_err, report.worst);
    }
}
