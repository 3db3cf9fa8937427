//! Desk-scale controllable diffusion: a frozen 1-D convolutional denoiser
//! plus lightweight trainable adaptor branches that attach time-varying
//! controls (chroma, chords) to it, with training, evaluation, and a CLI.

pub mod error;
pub mod experiments;
pub mod adaptors;
pub mod backbone;
pub mod conditions;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};
