//! Training: the denoising objective, condition dropout, classifier-free
//! guidance, the loops, and checkpoint persistence.

pub mod checkpoint;
pub mod config;
pub mod dropout;
pub mod loss;
pub mod run;

pub use checkpoint::{
    bytes_digest, checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint,
    store_digest, Checkpoint, CheckpointKind,
};
pub use config::TrainConfig;
pub use dropout::DropoutMask;
pub use loss::{cfg_denoise, sample_loss, sample_noise_level, TrainItem};
pub use run::{train_adaptor, train_backbone, LogRow, TrainLog};
