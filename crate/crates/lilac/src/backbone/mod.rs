//! The frozen denoiser that adaptor branches attach to: configuration,
//! conditional embeddings, U-Net layers, preconditioning, and the sampler.

pub mod config;
pub mod edm;
pub mod embed;
pub mod layers;
pub mod model;
pub mod sampler;

pub use config::BackboneConfig;
pub use edm::EdmPrecond;
pub use embed::{CondEmbedding, EmbedNet, StyleCond};
pub use layers::{Conv1dLayer, EncoderStage, GroupNormLayer, Init, LinearLayer, ResBlock};
pub use model::{stage_plan, Backbone, EncoderTrace, StagePlan};
pub use sampler::{heun_sample, karras_sigmas, SamplerConfig};
