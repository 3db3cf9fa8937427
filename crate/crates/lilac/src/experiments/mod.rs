//! Desk-scale experiments: synthetic dataset, invertible latent codec,
//! evaluation harnesses, configuration files, and the CLI.

pub mod cli;
pub mod codec;
pub mod configfile;
pub mod data;
pub mod eval;
pub mod gradsuite;
pub mod sampling;

pub use codec::{DecodedProbe, LatentCodec};
pub use configfile::{EvalConfig, ExperimentConfig};
pub use data::{generate_dataset, style_envelope, DataConfig, SyntheticSample};
pub use eval::{
    condition_map_for, decode_floor, eval_adherence, eval_conflict, report_params, to_train_items,
    ConflictSetting, EvalReport, EvalRow,
};
pub use gradsuite::standard_grad_checks;
pub use sampling::{sample, GenConditions};
