//! Conditional embeddings: noise-level Fourier features through a small MLP,
//! a learned per-style vector standing in for a global timbre embedding, and
//! dedicated learned null vectors for dropped conditions.

use crate::error::{Error, Result};
use crate::numerics::rng::Stream;
use crate::numerics::tape::{Tape, Var};
use crate::numerics::tensor::{ParamRef, ParamStore, Tensor};
use crate::numerics::Real;

use super::layers::{Init, LinearLayer};

/// Global timbre condition for one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StyleCond {
    Style(usize),
    /// Dropped: replaced by the learned null vector.
    Null,
}

/// Number of Fourier feature pairs for the noise embedding.
const FOURIER_PAIRS: usize = 8;
pub const FOURIER_DIM: usize = 2 * FOURIER_PAIRS;

fn fourier_features<R: Real>(x: f64) -> Tensor<R> {
    let mut data = Vec::with_capacity(FOURIER_DIM);
    for j in 0..FOURIER_PAIRS {
        let f = (1u64 << j) as f64 * std::f64::consts::PI * x;
        data.push(R::of(f.sin()));
        data.push(R::of(f.cos()));
    }
    Tensor::from_vec(&[FOURIER_DIM], data).expect("fixed fourier shape")
}

/// Embedding assembled on a tape for one denoise call.
#[derive(Clone, Copy, Debug)]
pub struct CondEmbedding {
    /// noise embedding + style embedding (or its null), dimension embed_dim
    pub combined: Var,
    pub style_is_null: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct EmbedNet {
    lin1: LinearLayer,
    lin2: LinearLayer,
    style_table: ParamRef,
    null_style: ParamRef,
    null_context: ParamRef,
    pub embed_dim: usize,
    pub num_styles: usize,
    pub context_channels: usize,
}

impl EmbedNet {
    pub fn new<R: Real>(
        ps: &mut ParamStore<R>,
        prefix: &str,
        embed_dim: usize,
        num_styles: usize,
        context_channels: usize,
        stream: &mut Stream,
    ) -> Result<Self> {
        let lin1 =
            LinearLayer::new(ps, &format!("{prefix}.lin1"), FOURIER_DIM, embed_dim, Init::HeNormal, stream)?;
        let lin2 =
            LinearLayer::new(ps, &format!("{prefix}.lin2"), embed_dim, embed_dim, Init::HeNormal, stream)?;
        let style_table = ps.register(
            &format!("{prefix}.style_table"),
            Tensor::randn(&[num_styles, embed_dim], 0.5, stream),
        )?;
        let null_style =
            ps.register(&format!("{prefix}.null_style"), Tensor::zeros(&[embed_dim]))?;
        let null_context =
            ps.register(&format!("{prefix}.null_context"), Tensor::zeros(&[context_channels]))?;
        Ok(EmbedNet { lin1, lin2, style_table, null_style, null_context, embed_dim, num_styles, context_channels })
    }

    pub fn cond_embedding<R: Real>(
        &self,
        tape: &mut Tape<R>,
        ps: &ParamStore<R>,
        c_noise: f64,
        style: StyleCond,
    ) -> Result<CondEmbedding> {
        let four = tape.constant(&fourier_features::<R>(c_noise));
        let mut h = self.lin1.forward(tape, ps, four)?;
        h = tape.silu(h);
        h = self.lin2.forward(tape, ps, h)?;
        let (style_vec, style_is_null) = match style {
            StyleCond::Style(i) => {
                if i >= self.num_styles {
                    return Err(Error::Contract(format!(
                        "style id {i} out of range (num_styles {})",
                        self.num_styles
                    )));
                }
                let table = tape.param(ps, self.style_table);
                (tape.row_select(table, i)?, false)
            }
            StyleCond::Null => (tape.param(ps, self.null_style), true),
        };
        let combined = tape.add(h, style_vec)?;
        Ok(CondEmbedding { combined, style_is_null })
    }

    /// Context map for the network input: the given latent, or the learned
    /// null context broadcast across time when the condition is dropped.
    pub fn context_var<R: Real>(
        &self,
        tape: &mut Tape<R>,
        ps: &ParamStore<R>,
        context: Option<&Tensor<R>>,
        t: usize,
    ) -> Result<Var> {
        match context {
            Some(c) => {
                if c.shape() != [self.context_channels, t] {
                    return Err(Error::Dimension(format!(
                        "context shape {:?}, expected [{}, {t}]",
                        c.shape(),
                        self.context_channels
                    )));
                }
                Ok(tape.constant(c))
            }
            None => {
                let v = tape.param(ps, self.null_context);
                tape.broadcast_time(v, t)
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.lin1.param_count()
            + self.lin2.param_count()
            + self.num_styles * self.embed_dim
            + self.embed_dim
            + self.context_channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngKey;

    #[test]
    fn style_out_of_range_is_contract_error() {
        let mut stream = RngKey::root(1).stream();
        let mut ps = ParamStore::<f64>::new();
        let net = EmbedNet::new(&mut ps, "embed", 8, 3, 4, &mut stream).unwrap();
        let mut tape = Tape::new();
        assert!(net.cond_embedding(&mut tape, &ps, 0.0, StyleCond::Style(3)).is_err());
        assert!(net.cond_embedding(&mut tape, &ps, 0.0, StyleCond::Style(2)).is_ok());
    }

    #[test]
    fn null_style_is_learned_vector_not_garbage() {
        let mut stream = RngKey::root(1).stream();
        let mut ps = ParamStore::<f64>::new();
        let net = EmbedNet::new(&mut ps, "embed", 8, 3, 4, &mut stream).unwrap();
        let mut tape = Tape::new();
        let e = net.cond_embedding(&mut tape, &ps, 0.0, StyleCond::Null).unwrap();
        assert!(e.style_is_null);
        assert!(tape.value(e.combined).iter().all(|v| v.is_finite()));
    }
}
