//! The denoising training objective and classifier-free guidance.

use crate::adaptors::{controlled_denoise, controlled_denoise_tensor, AdaptorBranch};
use crate::backbone::{Backbone, StyleCond};
use crate::error::{Error, Result};
use crate::numerics::rng::Stream;
use crate::numerics::tape::{Tape, Var};
use crate::numerics::tensor::Tensor;
use crate::numerics::Real;

use super::dropout::DropoutMask;

/// One training example as the loop consumes it.
#[derive(Clone, Debug)]
pub struct TrainItem<R: Real> {
    pub latent: Tensor<R>,
    pub style: usize,
    pub context: Tensor<R>,
    /// Condition map aligned to the latent; `None` when training the bare
    /// backbone.
    pub condition: Option<Tensor<R>>,
}

/// Log-normal noise level: sigma = exp(p_mean + p_std * z).
pub fn sample_noise_level(stream: &mut Stream, p_mean: f64, p_std: f64) -> f64 {
    (p_mean + p_std * stream.normal()).exp()
}

/// Builds one sample's weighted denoising loss on the tape:
/// lambda(sigma) * mean((D(x + sigma*n) - x)^2), with the dropout mask
/// already resolved into null conditions.
pub fn sample_loss<R: Real>(
    tape: &mut Tape<R>,
    backbone: &Backbone<R>,
    branch: Option<&AdaptorBranch<R>>,
    item: &TrainItem<R>,
    mask: DropoutMask,
    sigma: f64,
    noise: &Tensor<R>,
) -> Result<Var> {
    if noise.shape() != item.latent.shape() {
        return Err(Error::Dimension("noise/latent shape mismatch".into()));
    }
    let noisy: Vec<R> = item
        .latent
        .data()
        .iter()
        .zip(noise.data())
        .map(|(x, n)| *x + R::of(sigma) * *n)
        .collect();
    let x_noisy = Tensor::from_vec(item.latent.shape(), noisy)?;

    let style = if mask.keep_e { StyleCond::Style(item.style) } else { StyleCond::Null };
    let context = if mask.keep_context { Some(&item.context) } else { None };

    let d = match branch {
        Some(branch) => {
            let cond = item.condition.as_ref().ok_or_else(|| {
                Error::Contract("adaptor training needs a condition map per item".into())
            })?;
            let zero;
            let c = if mask.keep_c {
                cond
            } else {
                zero = Tensor::zeros(cond.shape());
                &zero
            };
            controlled_denoise(tape, backbone, branch, &x_noisy, sigma, style, context, c)?
        }
        None => backbone.denoise(tape, &x_noisy, sigma, style, context)?,
    };
    let target = tape.constant(&item.latent);
    let diff = tape.sub(d, target)?;
    let sq = tape.mul(diff, diff)?;
    let mse = tape.mean_all(sq);
    Ok(tape.scalar_mul(mse, R::of(backbone.precond.loss_weight(sigma))))
}

/// Classifier-free guidance: D_null + w*(D_cond - D_null). At w = 1 this is
/// exactly the conditioned estimate (the null pass is skipped); at w = 0 the
/// fully null-conditioned one.
#[allow(clippy::too_many_arguments)]
pub fn cfg_denoise<R: Real>(
    backbone: &Backbone<R>,
    branch: Option<&AdaptorBranch<R>>,
    x_noisy: &Tensor<R>,
    sigma: f64,
    style: StyleCond,
    context: Option<&Tensor<R>>,
    condition: Option<&Tensor<R>>,
    weight: f64,
) -> Result<Tensor<R>> {
    if weight < 0.0 {
        return Err(Error::Domain(format!("cfg weight {weight} must be >= 0")));
    }
    let cond_pass = |style: StyleCond, context: Option<&Tensor<R>>, c_zero: bool| -> Result<Tensor<R>> {
        match branch {
            Some(branch) => {
                let cond = condition.ok_or_else(|| {
                    Error::Contract("cfg with an adaptor needs a condition map".into())
                })?;
                let zero;
                let c = if c_zero {
                    zero = Tensor::zeros(cond.shape());
                    &zero
                } else {
                    cond
                };
                controlled_denoise_tensor(backbone, branch, x_noisy, sigma, style, context, c)
            }
            None => backbone.denoise_tensor(x_noisy, sigma, style, context),
        }
    };
    if weight == 1.0 {
        return cond_pass(style, context, false);
    }
    let d_cond = cond_pass(style, context, false)?;
    let d_null = cond_pass(StyleCond::Null, None, true)?;
    let w = R::of(weight);
    let out: Vec<R> = d_null
        .data()
        .iter()
        .zip(d_cond.data())
        .map(|(n, c)| *n + w * (*c - *n))
        .collect();
    Tensor::from_vec(x_noisy.shape(), out)
}
