//! The frozen denoiser: a 1-D convolutional U-Net over latent sequences with
//! per-block conditional injection and additive skip connections.

use crate::error::{Error, Result};
use crate::numerics::rng::RngKey;
use crate::numerics::tape::{Tape, Var};
use crate::numerics::tensor::{ParamStore, Tensor};
use crate::numerics::Real;

use super::config::BackboneConfig;
use super::edm::EdmPrecond;
use super::embed::{CondEmbedding, EmbedNet, StyleCond};
use super::layers::{Conv1dLayer, EncoderStage, Init, ResBlock};

/// Width and downsampling target of one encoder position, derived from the
/// configuration. The adaptor branches reuse this plan to mirror the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StagePlan {
    pub width: usize,
    /// Stride-2 convolution to this width follows the block, if present.
    pub down_to: Option<usize>,
}

pub fn stage_plan(config: &BackboneConfig) -> Vec<StagePlan> {
    let mut plan = Vec::new();
    let levels = &config.levels;
    for (l, &width) in levels.iter().enumerate() {
        for b in 0..config.blocks_per_level {
            let last_in_level = b == config.blocks_per_level - 1;
            let down_to = if last_in_level && l + 1 < levels.len() { Some(levels[l + 1]) } else { None };
            plan.push(StagePlan { width, down_to });
        }
    }
    plan
}

/// Per-level features and the skip tensors consumed by the decoder.
pub struct EncoderTrace {
    /// Block outputs, one per encoder stage, before downsampling (these feed
    /// the decoder's additive skips).
    pub skips: Vec<Var>,
    /// Stage outputs after any downsampling.
    pub features: Vec<Var>,
    pub bottom: Var,
}

pub struct Backbone<R: Real> {
    pub config: BackboneConfig,
    pub params: ParamStore<R>,
    pub embed: EmbedNet,
    pub conv_in: Conv1dLayer,
    pub stages: Vec<EncoderStage>,
    pub mid: ResBlock,
    dec_res: Vec<ResBlock>,
    dec_up: Vec<Option<Conv1dLayer>>,
    pub conv_out: Conv1dLayer,
    pub precond: EdmPrecond,
}

impl<R: Real> Backbone<R> {
    /// Deterministic construction: the same (config, seed) always yields
    /// bit-identical parameters.
    pub fn new(config: BackboneConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut stream = RngKey::root(seed).child(1).stream();
        let mut ps = ParamStore::new();
        let embed = EmbedNet::new(
            &mut ps,
            "embed",
            config.embed_dim,
            config.num_styles,
            config.context_channels,
            &mut stream,
        )?;
        let plan = stage_plan(&config);
        let w0 = config.levels[0];
        let conv_in = Conv1dLayer::new(
            &mut ps,
            "conv_in",
            config.latent_channels + config.context_channels,
            w0,
            3,
            1,
            Init::HeNormal,
            &mut stream,
        )?;
        let mut stages = Vec::with_capacity(plan.len());
        for (i, sp) in plan.iter().enumerate() {
            let res = ResBlock::new(&mut ps, &format!("enc{i}.res"), sp.width, config.embed_dim, &mut stream)?;
            let down = match sp.down_to {
                Some(next) => Some(Conv1dLayer::new(
                    &mut ps,
                    &format!("enc{i}.down"),
                    sp.width,
                    next,
                    3,
                    2,
                    Init::HeNormal,
                    &mut stream,
                )?),
                None => None,
            };
            stages.push(EncoderStage { res, down });
        }
        let bottom_width = *config.levels.last().expect("levels non-empty");
        let mid = ResBlock::new(&mut ps, "mid.res", bottom_width, config.embed_dim, &mut stream)?;
        let mut dec_res = Vec::with_capacity(plan.len());
        let mut dec_up = Vec::with_capacity(plan.len());
        for (i, sp) in plan.iter().enumerate() {
            dec_res.push(ResBlock::new(&mut ps, &format!("dec{i}.res"), sp.width, config.embed_dim, &mut stream)?);
            dec_up.push(match sp.down_to {
                Some(next) => Some(Conv1dLayer::new(
                    &mut ps,
                    &format!("dec{i}.up"),
                    next,
                    sp.width,
                    3,
                    1,
                    Init::HeNormal,
                    &mut stream,
                )?),
                None => None,
            });
        }
        // Zero-initialized output head: a fresh network denoises to c_skip*x.
        let conv_out =
            Conv1dLayer::new(&mut ps, "conv_out", w0, config.latent_channels, 3, 1, Init::Zero, &mut stream)?;
        Ok(Backbone {
            config,
            params: ps,
            embed,
            conv_in,
            stages,
            mid,
            dec_res,
            dec_up,
            conv_out,
            precond: EdmPrecond::default(),
        })
    }

    pub fn cond_embedding(
        &self,
        tape: &mut Tape<R>,
        c_noise: f64,
        style: StyleCond,
    ) -> Result<CondEmbedding> {
        self.embed.cond_embedding(tape, &self.params, c_noise, style)
    }

    pub fn context_var(
        &self,
        tape: &mut Tape<R>,
        context: Option<&Tensor<R>>,
        t: usize,
    ) -> Result<Var> {
        self.embed.context_var(tape, &self.params, context, t)
    }

    /// Runs the frozen encoder: input concat -> conv_in -> stages, recording
    /// every block output. Read-only on parameters.
    pub fn encoder_forward(
        &self,
        tape: &mut Tape<R>,
        x0: Var,
        e: &CondEmbedding,
        context: Var,
    ) -> Result<EncoderTrace> {
        let mut h = tape.concat_channels(x0, context)?;
        h = self.conv_in.forward(tape, &self.params, h)?;
        let mut skips = Vec::with_capacity(self.stages.len());
        let mut features = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            h = stage.res.forward(tape, &self.params, h, e.combined)?;
            skips.push(h);
            if let Some(down) = &stage.down {
                h = down.forward(tape, &self.params, h)?;
            }
            features.push(h);
        }
        Ok(EncoderTrace { skips, features, bottom: h })
    }

    /// Runs the bottleneck and decoder against the given skip tensors.
    /// Callers substitute adapted skips here.
    pub fn decoder_forward(
        &self,
        tape: &mut Tape<R>,
        bottom: Var,
        skips: &[Var],
        e: &CondEmbedding,
    ) -> Result<Var> {
        if skips.len() != self.stages.len() {
            return Err(Error::Dimension(format!(
                "decoder wants {} skips, got {}",
                self.stages.len(),
                skips.len()
            )));
        }
        let mut h = self.mid.forward(tape, &self.params, bottom, e.combined)?;
        for i in (0..self.stages.len()).rev() {
            if let Some(up) = &self.dec_up[i] {
                h = tape.upsample2(h)?;
                h = up.forward(tape, &self.params, h)?;
            }
            h = tape.add(h, skips[i])?;
            h = self.dec_res[i].forward(tape, &self.params, h, e.combined)?;
        }
        self.conv_out.forward(tape, &self.params, h)
    }

    /// Raw network pass on an already-preconditioned input.
    pub fn nn_forward(
        &self,
        tape: &mut Tape<R>,
        x_in: Var,
        e: &CondEmbedding,
        context: Var,
    ) -> Result<Var> {
        let trace = self.encoder_forward(tape, x_in, e, context)?;
        self.decoder_forward(tape, trace.bottom, &trace.skips, e)
    }

    /// Preconditioned denoising estimate D(x; sigma).
    pub fn denoise(
        &self,
        tape: &mut Tape<R>,
        x_noisy: &Tensor<R>,
        sigma: f64,
        style: StyleCond,
        context: Option<&Tensor<R>>,
    ) -> Result<Var> {
        let (x, e, ctx, t) = self.denoise_inputs(tape, x_noisy, sigma, style, context)?;
        let _ = t;
        let x_in = tape.scalar_mul(x, R::of(self.precond.c_in(sigma)));
        let nn = self.nn_forward(tape, x_in, &e, ctx)?;
        self.combine_denoise(tape, x, nn, sigma)
    }

    /// Shared input validation/plumbing for plain and adapted denoising.
    pub fn denoise_inputs(
        &self,
        tape: &mut Tape<R>,
        x_noisy: &Tensor<R>,
        sigma: f64,
        style: StyleCond,
        context: Option<&Tensor<R>>,
    ) -> Result<(Var, CondEmbedding, Var, usize)> {
        EdmPrecond::check_sigma(sigma)?;
        let shape = x_noisy.shape();
        if shape.len() != 2 || shape[0] != self.config.latent_channels {
            return Err(Error::Dimension(format!(
                "denoise input shape {:?}, expected [{}, T]",
                shape, self.config.latent_channels
            )));
        }
        let t = shape[1];
        self.config.validate_time_len(t)?;
        let x = tape.constant(x_noisy);
        let e = self.cond_embedding(tape, self.precond.c_noise(sigma), style)?;
        let ctx = self.context_var(tape, context, t)?;
        Ok((x, e, ctx, t))
    }

    /// D = c_skip*x + c_out*nn.
    pub fn combine_denoise(&self, tape: &mut Tape<R>, x: Var, nn: Var, sigma: f64) -> Result<Var> {
        let skip = tape.scalar_mul(x, R::of(self.precond.c_skip(sigma)));
        let out = tape.scalar_mul(nn, R::of(self.precond.c_out(sigma)));
        tape.add(skip, out)
    }

    /// Convenience: denoise into a plain tensor (no gradients).
    pub fn denoise_tensor(
        &self,
        x_noisy: &Tensor<R>,
        sigma: f64,
        style: StyleCond,
        context: Option<&Tensor<R>>,
    ) -> Result<Tensor<R>> {
        let mut tape = Tape::new();
        let d = self.denoise(&mut tape, x_noisy, sigma, style, context)?;
        Ok(tape.to_tensor(d))
    }

    pub fn total_params(&self) -> usize {
        self.params.total_params()
    }

    /// Parameter count of the encoder half (input convolution, blocks,
    /// downsamplers) — what a clone-branch copies.
    pub fn encoder_params(&self) -> usize {
        self.conv_in.param_count()
            + self.stages.iter().map(|s| s.param_count()).sum::<usize>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> BackboneConfig {
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

    #[test]
    fn same_config_seed_is_bit_identical() {
        let a = Backbone::<f32>::new(toy_config(), 7).unwrap();
        let b = Backbone::<f32>::new(toy_config(), 7).unwrap();
        for ((na, ta), (nb, tb)) in a.params.iter().zip(b.params.iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.data(), tb.data(), "param {na} differs");
        }
        let c = Backbone::<f32>::new(toy_config(), 8).unwrap();
        let differs = a
            .params
            .iter()
            .zip(c.params.iter())
            .any(|((_, ta), (_, tc))| ta.data() != tc.data());
        assert!(differs, "different seeds must differ");
    }

    #[test]
    fn structural_shapes() {
        let config = BackboneConfig::default();
        let m = Backbone::<f32>::new(config.clone(), 1).unwrap();
        assert_eq!(m.stages.len(), 3);
        let t = 32;
        let x = Tensor::zeros(&[config.latent_channels, t]);
        let mut tape = Tape::new();
        let (xv, e, ctx, _) = m.denoise_inputs(&mut tape, &x, 1.0, StyleCond::Null, None).unwrap();
        let trace = m.encoder_forward(&mut tape, xv, &e, ctx).unwrap();
        assert_eq!(trace.skips.len(), 3);
        // features at level l have width levels[l] and length T / 2^l
        for (l, &skip) in trace.skips.iter().enumerate() {
            assert_eq!(tape.shape(skip), &[config.levels[l], t >> l]);
        }
        assert_eq!(tape.shape(trace.bottom), &[64, t / 4]);
        let nn = m.decoder_forward(&mut tape, trace.bottom, &trace.skips, &e).unwrap();
        assert_eq!(tape.shape(nn), x.shape());
    }

    #[test]
    fn zero_output_head_reduces_to_c_skip_scaling() {
        // conv_out is zero-initialized, so a fresh model returns c_skip*x.
        let m = Backbone::<f64>::new(toy_config(), 3).unwrap();
        let mut stream = RngKey::root(5).stream();
        let x = Tensor::randn(&[12, 8], 1.0, &mut stream);
        let sigma = 0.7;
        let d = m.denoise_tensor(&x, sigma, StyleCond::Null, None).unwrap();
        let cs = m.precond.c_skip(sigma);
        for (dv, xv) in d.data().iter().zip(x.data()) {
            assert!((dv - cs * xv).abs() < 1e-12);
        }
    }

    #[test]
    fn denoise_is_linear_in_nn_output() {
        // Superposition through combine_denoise on a stubbed NN output.
        let m = Backbone::<f64>::new(toy_config(), 3).unwrap();
        let mut stream = RngKey::root(6).stream();
        let x = Tensor::randn(&[12, 8], 1.0, &mut stream);
        let n1 = Tensor::randn(&[12, 8], 1.0, &mut stream);
        let n2 = Tensor::randn(&[12, 8], 1.0, &mut stream);
        let sigma = 1.3;

        let eval = |nn: &Tensor<f64>| -> Vec<f64> {
            let mut tape = Tape::new();
            let xv = tape.constant(&x);
            let nv = tape.constant(nn);
            let d = m.combine_denoise(&mut tape, xv, nv, sigma).unwrap();
            tape.value(d).to_vec()
        };
        let d1 = eval(&n1);
        let d2 = eval(&n2);
        let sum = Tensor::from_vec(
            &[12, 8],
            n1.data().iter().zip(n2.data()).map(|(a, b)| a + b).collect(),
        )
        .unwrap();
        let d_sum = eval(&sum);
        let c_skip = m.precond.c_skip(sigma);
        for i in 0..d_sum.len() {
            // D(n1+n2) = D(n1) + D(n2) - c_skip*x (affine superposition)
            let expect = d1[i] + d2[i] - c_skip * x.data()[i];
            assert!((d_sum[i] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn encoder_outputs_ignore_decoder_params() {
        let mut m = Backbone::<f64>::new(toy_config(), 4).unwrap();
        let mut stream = RngKey::root(9).stream();
        let x = Tensor::randn(&[12, 8], 1.0, &mut stream);

        let run_encoder = |m: &Backbone<f64>| -> Vec<Vec<f64>> {
            let mut tape = Tape::new();
            let (xv, e, ctx, _) =
                m.denoise_inputs(&mut tape, &x, 0.5, StyleCond::Style(0), None).unwrap();
            let trace = m.encoder_forward(&mut tape, xv, &e, ctx).unwrap();
            trace.skips.iter().map(|&s| tape.value(s).to_vec()).collect()
        };
        let before = run_encoder(&m);
        // Perturb every decoder parameter.
        for idx in 0..m.params.len() {
            let name = m.params.name(idx).to_string();
            if name.starts_with("dec") || name.starts_with("mid") || name.starts_with("conv_out") {
                for v in m.params.tensor_at_mut(idx).data_mut() {
                    *v += 123.0;
                }
            }
        }
        let after = run_encoder(&m);
        assert_eq!(before, after);
    }

    #[test]
    fn invalid_time_and_sigma_error() {
        let m = Backbone::<f32>::new(toy_config(), 1).unwrap();
        let bad_t = Tensor::zeros(&[12, 9]);
        assert!(m.denoise_tensor(&bad_t, 1.0, StyleCond::Null, None).is_err());
        let x = Tensor::zeros(&[12, 8]);
        assert!(m.denoise_tensor(&x, 0.0, StyleCond::Null, None).is_err());
    }

    use crate::numerics::rng::RngKey;
}
