//! Parameterized layers used by the denoiser and the adaptor branches.

use crate::error::{Error, Result};
use crate::numerics::kernels::group_count;
use crate::numerics::rng::Stream;
use crate::numerics::tape::{Tape, Var};
use crate::numerics::tensor::{ParamRef, ParamStore, Tensor};
use crate::numerics::Real;

/// Weight initialization for convolutions and dense layers.
#[derive(Clone, Copy, Debug)]
pub enum Init {
    /// Normal with std sqrt(2 / fan_in).
    HeNormal,
    /// All zeros (used where a layer must vanish at initialization).
    Zero,
}

#[derive(Clone, Copy, Debug)]
pub struct Conv1dLayer {
    pub w: ParamRef,
    /// None for convolutions feeding straight into a normalization, where a
    /// bias would be an exactly-null direction.
    pub b: Option<ParamRef>,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
}

impl Conv1dLayer {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        init: Init,
        stream: &mut Stream,
    ) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::Config(format!("conv kernel width {k} must be odd")));
        }
        let w = match init {
            Init::HeNormal => {
                let std = (2.0 / (c_in * k) as f64).sqrt();
                Tensor::randn(&[c_out, c_in, k], std, stream)
            }
            Init::Zero => Tensor::zeros(&[c_out, c_in, k]),
        };
        let b = Tensor::zeros(&[c_out]);
        Self::with_tensors(ps, name, w, b, stride)
    }

    /// Convolution without a bias parameter (for layers feeding straight
    /// into a normalization).
    pub fn new_no_bias<R: Real>(
        ps: &mut ParamStore<R>,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        init: Init,
        stream: &mut Stream,
    ) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::Config(format!("conv kernel width {k} must be odd")));
        }
        let w = match init {
            Init::HeNormal => {
                let std = (2.0 / (c_in * k) as f64).sqrt();
                Tensor::randn(&[c_out, c_in, k], std, stream)
            }
            Init::Zero => Tensor::zeros(&[c_out, c_in, k]),
        };
        let w = ps.register(&format!("{name}.w"), w)?;
        Ok(Conv1dLayer { w, b: None, c_in, c_out, k, stride })
    }

    /// Registers explicitly constructed weights (identity/zero convolutions).
    pub fn with_tensors<R: Real>(
        ps: &mut ParamStore<R>,
        name: &str,
        w: Tensor<R>,
        b: Tensor<R>,
        stride: usize,
    ) -> Result<Self> {
        let ws = w.shape().to_vec();
        if ws.len() != 3 {
            return Err(Error::Dimension(format!("conv weights must be CxCxK, got {ws:?}")));
        }
        let (c_out, c_in, k) = (ws[0], ws[1], ws[2]);
        if b.shape() != [c_out] {
            return Err(Error::Dimension("conv bias must be [C_out]".into()));
        }
        let w = ps.register(&format!("{name}.w"), w)?;
        let b = ps.register(&format!("{name}.b"), b)?;
        Ok(Conv1dLayer { w, b: Some(b), c_in, c_out, k, stride })
    }

    pub fn forward<R: Real>(&self, tape: &mut Tape<R>, ps: &ParamStore<R>, x: Var) -> Result<Var> {
        let w = tape.param(ps, self.w);
        let b = match self.b {
            Some(b) => tape.param(ps, b),
            None => tape.constant(&Tensor::zeros(&[self.c_out])),
        };
        tape.conv1d(x, w, b, self.stride)
    }

    pub fn param_count(&self) -> usize {
        self.c_out * self.c_in * self.k + if self.b.is_some() { self.c_out } else { 0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GroupNormLayer {
    pub gamma: ParamRef,
    pub beta: ParamRef,
    pub channels: usize,
    pub groups: usize,
}

impl GroupNormLayer {
    pub fn new<R: Real>(ps: &mut ParamStore<R>, name: &str, channels: usize) -> Result<Self> {
        let gamma = ps.register(
            &format!("{name}.g"),
            Tensor::from_vec(&[channels], vec![R::ONE; channels])?,
        )?;
        let beta = ps.register(&format!("{name}.b"), Tensor::zeros(&[channels]))?;
        Ok(GroupNormLayer { gamma, beta, channels, groups: group_count(channels) })
    }

    pub fn forward<R: Real>(&self, tape: &mut Tape<R>, ps: &ParamStore<R>, x: Var) -> Result<Var> {
        let gamma = tape.param(ps, self.gamma);
        let beta = tape.param(ps, self.beta);
        tape.group_norm(x, gamma, beta, self.groups)
    }

    pub fn param_count(&self) -> usize {
        2 * self.channels
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LinearLayer {
    pub w: ParamRef,
    pub b: ParamRef,
    pub n_in: usize,
    pub n_out: usize,
}

impl LinearLayer {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        name: &str,
        n_in: usize,
        n_out: usize,
        init: Init,
        stream: &mut Stream,
    ) -> Result<Self> {
        let w = match init {
            Init::HeNormal => Tensor::randn(&[n_out, n_in], (2.0 / n_in as f64).sqrt(), stream),
            Init::Zero => Tensor::zeros(&[n_out, n_in]),
        };
        let w = ps.register(&format!("{name}.w"), w)?;
        let b = ps.register(&format!("{name}.b"), Tensor::zeros(&[n_out]))?;
        Ok(LinearLayer { w, b, n_in, n_out })
    }

    pub fn forward<R: Real>(&self, tape: &mut Tape<R>, ps: &ParamStore<R>, x: Var) -> Result<Var> {
        let w = tape.param(ps, self.w);
        let b = tape.param(ps, self.b);
        tape.linear(x, w, b)
    }

    pub fn param_count(&self) -> usize {
        self.n_out * self.n_in + self.n_out
    }
}

/// Residual block: gn -> silu -> conv -> gn -> scale/shift from the
/// conditional embedding -> silu -> conv -> +x. The closing convolution is
/// zero-initialized so a fresh block is the identity map.
#[derive(Clone, Copy, Debug)]
pub struct ResBlock {
    pub gn1: GroupNormLayer,
    pub conv1: Conv1dLayer,
    pub gn2: GroupNormLayer,
    pub film_scale: LinearLayer,
    pub film_shift: LinearLayer,
    pub conv2: Conv1dLayer,
    pub channels: usize,
}

impl ResBlock {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        prefix: &str,
        channels: usize,
        embed_dim: usize,
        stream: &mut Stream,
    ) -> Result<Self> {
        Ok(ResBlock {
            gn1: GroupNormLayer::new(ps, &format!("{prefix}.gn1"), channels)?,
            conv1: Conv1dLayer::new_no_bias(ps, &format!("{prefix}.conv1"), channels, channels, 3, 1, Init::HeNormal, stream)?,
            gn2: GroupNormLayer::new(ps, &format!("{prefix}.gn2"), channels)?,
            film_scale: LinearLayer::new(ps, &format!("{prefix}.film_s"), embed_dim, channels, Init::Zero, stream)?,
            film_shift: LinearLayer::new(ps, &format!("{prefix}.film_h"), embed_dim, channels, Init::Zero, stream)?,
            conv2: Conv1dLayer::new(ps, &format!("{prefix}.conv2"), channels, channels, 3, 1, Init::Zero, stream)?,
            channels,
        })
    }

    pub fn forward<R: Real>(
        &self,
        tape: &mut Tape<R>,
        ps: &ParamStore<R>,
        x: Var,
        e: Var,
    ) -> Result<Var> {
        let mut h = self.gn1.forward(tape, ps, x)?;
        h = tape.silu(h);
        h = self.conv1.forward(tape, ps, h)?;
        h = self.gn2.forward(tape, ps, h)?;
        let scale = self.film_scale.forward(tape, ps, e)?;
        let shift = self.film_shift.forward(tape, ps, e)?;
        h = tape.scale_shift(h, scale, shift)?;
        h = tape.silu(h);
        h = self.conv2.forward(tape, ps, h)?;
        tape.add(x, h)
    }

    pub fn param_count(&self) -> usize {
        self.gn1.param_count()
            + self.conv1.param_count()
            + self.gn2.param_count()
            + self.film_scale.param_count()
            + self.film_shift.param_count()
            + self.conv2.param_count()
    }
}

/// One encoder position: a residual block whose output feeds a skip, plus an
/// optional stride-2 downsampling convolution at a level boundary.
#[derive(Clone, Copy, Debug)]
pub struct EncoderStage {
    pub res: ResBlock,
    pub down: Option<Conv1dLayer>,
}

impl EncoderStage {
    pub fn param_count(&self) -> usize {
        self.res.param_count() + self.down.map_or(0, |d| d.param_count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngKey;

    #[test]
    fn resblock_is_identity_at_init() {
        let mut stream = RngKey::root(3).stream();
        let mut ps = ParamStore::<f64>::new();
        let rb = ResBlock::new(&mut ps, "rb", 6, 8, &mut stream).unwrap();
        let x = Tensor::randn(&[6, 10], 1.0, &mut stream);
        let e = Tensor::randn(&[8], 1.0, &mut stream);
        let mut tape = Tape::new();
        let xv = tape.constant(&x);
        let ev = tape.constant(&e);
        let out = rb.forward(&mut tape, &ps, xv, ev).unwrap();
        assert_eq!(tape.value(out), x.data());
    }

    #[test]
    fn conv_layer_rejects_even_kernel() {
        let mut stream = RngKey::root(3).stream();
        let mut ps = ParamStore::<f32>::new();
        let err = Conv1dLayer::new(&mut ps, "c", 2, 2, 2, 1, Init::HeNormal, &mut stream);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
