//! Adaptor branches: clone-encoder baseline, wrapped frozen-block variants,
//! the inline variant, their initializers, and parameter accounting.

pub mod branch;
pub mod census;
pub mod init;
pub mod variant;

pub use branch::{
    clone_encoder, controlled_denoise, controlled_denoise_tensor, AdaptorBranch, BranchBody,
    WrapStage,
};
pub use census::{count_params, variant_census, ParamCensus};
pub use init::{identity_conv, zero_conv};
pub use variant::{AdaptorKind, AdaptorVariant};
