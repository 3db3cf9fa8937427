//! Trainable adaptor branches over a frozen backbone.
//!
//! Both kinds consume the preconditioned noisy input plus a condition map
//! injected through an input zero convolution, and emit one additive delta
//! per encoder block for the decoder's skip connections. The clone kind runs
//! its own trainable copy of the encoder; the wrapped kind re-runs the frozen
//! blocks between small per-block convolutions. The inline kind skips the
//! separate branch entirely and wraps the single forward pass.

use crate::backbone::model::{stage_plan, Backbone, EncoderTrace};
use crate::backbone::{CondEmbedding, Conv1dLayer, EncoderStage, Init, ResBlock, StyleCond};
use crate::error::{Error, Result};
use crate::numerics::rng::RngKey;
use crate::numerics::tape::{Tape, Var};
use crate::numerics::tensor::{ParamStore, Tensor};
use crate::numerics::Real;

use super::init::{identity_conv, zero_conv};
use super::variant::{AdaptorKind, AdaptorVariant};

/// Optional wrapping layers around one frozen encoder block. A disabled
/// layer is a true no-op carrying zero parameters.
pub struct WrapStage {
    pub head: Option<Conv1dLayer>,
    pub tail: Option<Conv1dLayer>,
    pub residual: Option<Conv1dLayer>,
}

pub enum BranchBody {
    Clone { conv_in: Conv1dLayer, stages: Vec<EncoderStage> },
    Wrap(Vec<WrapStage>),
}

pub struct AdaptorBranch<R: Real> {
    pub variant: AdaptorVariant,
    pub params: ParamStore<R>,
    pub cond_channels: usize,
    pub z_in: Conv1dLayer,
    pub body: BranchBody,
    /// Per-block skip zero convolutions; empty for the inline kind.
    pub z_skip: Vec<Conv1dLayer>,
}

/// Trainable copy of the backbone's input convolution, encoder blocks and
/// downsamplers. Initial parameters are bit-equal to the frozen originals;
/// training then diverges freely without touching the backbone.
pub fn clone_encoder<R: Real>(
    backbone: &Backbone<R>,
    ps: &mut ParamStore<R>,
    seed: u64,
) -> Result<(Conv1dLayer, Vec<EncoderStage>)> {
    let mut stream = RngKey::root(seed).child(7).stream();
    let config = &backbone.config;
    let plan = stage_plan(config);
    let conv_in = Conv1dLayer::new(
        ps,
        "clone.conv_in",
        config.latent_channels + config.context_channels,
        config.levels[0],
        3,
        1,
        Init::Zero,
        &mut stream,
    )?;
    let mut stages = Vec::with_capacity(plan.len());
    for (i, sp) in plan.iter().enumerate() {
        let res =
            ResBlock::new(ps, &format!("clone.enc{i}.res"), sp.width, config.embed_dim, &mut stream)?;
        let down = match sp.down_to {
            Some(next) => Some(Conv1dLayer::new(
                ps,
                &format!("clone.enc{i}.down"),
                sp.width,
                next,
                3,
                2,
                Init::Zero,
                &mut stream,
            )?),
            None => None,
        };
        stages.push(EncoderStage { res, down });
    }
    // Copy values from the backbone by name; "clone." + original name.
    for idx in 0..ps.len() {
        let name = ps.name(idx).to_string();
        if let Some(orig) = name.strip_prefix("clone.") {
            let src = backbone
                .params
                .by_name(orig)
                .ok_or_else(|| Error::Config(format!("no backbone parameter {orig:?} to clone")))?
                .data()
                .to_vec();
            ps.tensor_at_mut(idx).data_mut().copy_from_slice(&src);
        }
    }
    Ok((conv_in, stages))
}

impl<R: Real> AdaptorBranch<R> {
    pub fn new(
        backbone: &Backbone<R>,
        variant: AdaptorVariant,
        cond_channels: usize,
        seed: u64,
    ) -> Result<Self> {
        variant.validate()?;
        let config = &backbone.config;
        let mut ps = ParamStore::new();
        let (w, b) = zero_conv::<R>(cond_channels, config.latent_channels, 1)?;
        let z_in = Conv1dLayer::with_tensors(&mut ps, "z_in", w, b, 1)?;
        let plan = stage_plan(config);

        let body = match variant.kind {
            AdaptorKind::ControlNetClone => {
                let (conv_in, stages) = clone_encoder(backbone, &mut ps, seed)?;
                BranchBody::Clone { conv_in, stages }
            }
            AdaptorKind::Lilac | AdaptorKind::LilacInline => {
                let mut wraps = Vec::with_capacity(plan.len());
                for (i, sp) in plan.iter().enumerate() {
                    let head = if variant.head {
                        let (w, b) = identity_conv::<R>(sp.width, 1)?;
                        Some(Conv1dLayer::with_tensors(&mut ps, &format!("wrap{i}.head"), w, b, 1)?)
                    } else {
                        None
                    };
                    let tail = if variant.tail {
                        let (w, b) = identity_conv::<R>(sp.width, 1)?;
                        Some(Conv1dLayer::with_tensors(&mut ps, &format!("wrap{i}.tail"), w, b, 1)?)
                    } else {
                        None
                    };
                    let residual = if variant.residual {
                        let (w, b) = zero_conv::<R>(sp.width, sp.width, 1)?;
                        Some(Conv1dLayer::with_tensors(&mut ps, &format!("wrap{i}.res"), w, b, 1)?)
                    } else {
                        None
                    };
                    wraps.push(WrapStage { head, tail, residual });
                }
                BranchBody::Wrap(wraps)
            }
        };

        let z_skip = if variant.kind == AdaptorKind::LilacInline {
            Vec::new()
        } else {
            let mut zs = Vec::with_capacity(plan.len());
            for (i, sp) in plan.iter().enumerate() {
                let (w, b) = zero_conv::<R>(sp.width, sp.width, 1)?;
                zs.push(Conv1dLayer::with_tensors(&mut ps, &format!("z_skip{i}"), w, b, 1)?);
            }
            zs
        };

        Ok(AdaptorBranch { variant, params: ps, cond_channels, z_in, body, z_skip })
    }

    /// x_hat0 = x0 + Z_in(c): channel-maps the condition and adds it to the
    /// (preconditioned) noisy input. Time lengths must already agree.
    pub fn condition_input(&self, tape: &mut Tape<R>, x0: Var, c: Var) -> Result<Var> {
        let xs = tape.shape(x0).to_vec();
        let cs = tape.shape(c).to_vec();
        if xs.len() != 2 || cs.len() != 2 || xs[1] != cs[1] {
            return Err(Error::Contract(format!(
                "condition_input: time length mismatch (x {xs:?}, c {cs:?})"
            )));
        }
        if cs[0] != self.cond_channels {
            return Err(Error::Contract(format!(
                "condition_input: {} condition channels, branch expects {}",
                cs[0], self.cond_channels
            )));
        }
        let mapped = self.z_in.forward(tape, &self.params, c)?;
        tape.add(x0, mapped)
    }

    /// Runs the branch and returns one skip delta per encoder block. The
    /// caller adds these onto the frozen skips (s_l = F_l(...) + delta_l).
    pub fn adaptor_forward(
        &self,
        tape: &mut Tape<R>,
        backbone: &Backbone<R>,
        x0: Var,
        c: Var,
        e: &CondEmbedding,
        context: Var,
    ) -> Result<Vec<Var>> {
        if self.variant.kind == AdaptorKind::LilacInline {
            return Err(Error::Contract(
                "inline variant has no separate branch; use inline_forward".into(),
            ));
        }
        let x_hat = self.condition_input(tape, x0, c)?;
        let mut h = tape.concat_channels(x_hat, context)?;
        let mut deltas = Vec::with_capacity(backbone.stages.len());
        match &self.body {
            BranchBody::Clone { conv_in, stages } => {
                if stages.len() != backbone.stages.len() {
                    return Err(Error::Config("clone/backbone stage count mismatch".into()));
                }
                h = conv_in.forward(tape, &self.params, h)?;
                for (i, stage) in stages.iter().enumerate() {
                    h = stage.res.forward(tape, &self.params, h, e.combined)?;
                    deltas.push(self.z_skip[i].forward(tape, &self.params, h)?);
                    if let Some(down) = &stage.down {
                        h = down.forward(tape, &self.params, h)?;
                    }
                }
            }
            BranchBody::Wrap(wraps) => {
                if wraps.len() != backbone.stages.len() {
                    return Err(Error::Config("wrap/backbone stage count mismatch".into()));
                }
                h = backbone.conv_in.forward(tape, &backbone.params, h)?;
                for (i, (wrap, frozen)) in wraps.iter().zip(&backbone.stages).enumerate() {
                    h = self.wrapped_block(tape, backbone, wrap, frozen, h, e)?;
                    deltas.push(self.z_skip[i].forward(tape, &self.params, h)?);
                    if let Some(down) = &frozen.down {
                        h = down.forward(tape, &backbone.params, h)?;
                    }
                }
            }
        }
        Ok(deltas)
    }

    /// One wrapped block: tail(F_l(head(x), e)) + residual(x), with disabled
    /// layers as identities / absent terms.
    fn wrapped_block(
        &self,
        tape: &mut Tape<R>,
        backbone: &Backbone<R>,
        wrap: &WrapStage,
        frozen: &EncoderStage,
        x: Var,
        e: &CondEmbedding,
    ) -> Result<Var> {
        let mut h = x;
        if let Some(head) = &wrap.head {
            h = head.forward(tape, &self.params, h)?;
        }
        h = frozen.res.forward(tape, &backbone.params, h, e.combined)?;
        if let Some(tail) = &wrap.tail {
            h = tail.forward(tape, &self.params, h)?;
        }
        if let Some(residual) = &wrap.residual {
            let r = residual.forward(tape, &self.params, x)?;
            h = tape.add(h, r)?;
        }
        Ok(h)
    }

    /// Single-pass inline forward: each encoder block is wrapped in place,
    /// the condition enters once at the network input, and the decoder runs
    /// unchanged. Returns the raw network output.
    pub fn inline_forward(
        &self,
        tape: &mut Tape<R>,
        backbone: &Backbone<R>,
        x0: Var,
        c: Var,
        e: &CondEmbedding,
        context: Var,
    ) -> Result<Var> {
        let BranchBody::Wrap(wraps) = &self.body else {
            return Err(Error::Contract("inline_forward requires the inline variant".into()));
        };
        if self.variant.kind != AdaptorKind::LilacInline {
            return Err(Error::Contract("inline_forward requires the inline variant".into()));
        }
        let x_hat = self.condition_input(tape, x0, c)?;
        let mut h = tape.concat_channels(x_hat, context)?;
        h = backbone.conv_in.forward(tape, &backbone.params, h)?;
        let mut skips = Vec::with_capacity(backbone.stages.len());
        for (wrap, frozen) in wraps.iter().zip(&backbone.stages) {
            h = self.wrapped_block(tape, backbone, wrap, frozen, h, e)?;
            skips.push(h);
            if let Some(down) = &frozen.down {
                h = down.forward(tape, &backbone.params, h)?;
            }
        }
        backbone.decoder_forward(tape, h, &skips, e)
    }
}

/// Preconditioned denoising with the adaptor attached: every decoder skip
/// becomes s_l = F_l(x_{l-1}, e) + Z_s(G_l(x_hat_{l-1}, e)); the inline kind
/// rewires the single pass instead.
pub fn controlled_denoise<R: Real>(
    tape: &mut Tape<R>,
    backbone: &Backbone<R>,
    branch: &AdaptorBranch<R>,
    x_noisy: &Tensor<R>,
    sigma: f64,
    style: StyleCond,
    context: Option<&Tensor<R>>,
    c: &Tensor<R>,
) -> Result<Var> {
    let (x, e, ctx, t) = backbone.denoise_inputs(tape, x_noisy, sigma, style, context)?;
    if c.shape() != [branch.cond_channels, t] {
        return Err(Error::Contract(format!(
            "condition map shape {:?}, expected [{}, {t}]",
            c.shape(),
            branch.cond_channels
        )));
    }
    let c_var = tape.constant(c);
    let x_in = tape.scalar_mul(x, R::of(backbone.precond.c_in(sigma)));
    let nn = match branch.variant.kind {
        AdaptorKind::LilacInline => branch.inline_forward(tape, backbone, x_in, c_var, &e, ctx)?,
        _ => {
            let trace: EncoderTrace = backbone.encoder_forward(tape, x_in, &e, ctx)?;
            let deltas = branch.adaptor_forward(tape, backbone, x_in, c_var, &e, ctx)?;
            let mut skips = Vec::with_capacity(trace.skips.len());
            for (s, d) in trace.skips.iter().zip(&deltas) {
                skips.push(tape.add(*s, *d)?);
            }
            backbone.decoder_forward(tape, trace.bottom, &skips, &e)?
        }
    };
    backbone.combine_denoise(tape, x, nn, sigma)
}

/// Convenience wrapper producing a plain tensor.
#[allow(clippy::too_many_arguments)]
pub fn controlled_denoise_tensor<R: Real>(
    backbone: &Backbone<R>,
    branch: &AdaptorBranch<R>,
    x_noisy: &Tensor<R>,
    sigma: f64,
    style: StyleCond,
    context: Option<&Tensor<R>>,
    c: &Tensor<R>,
) -> Result<Tensor<R>> {
    let mut tape = Tape::new();
    let d = controlled_denoise(&mut tape, backbone, branch, x_noisy, sigma, style, context, c)?;
    Ok(tape.to_tensor(d))
}
