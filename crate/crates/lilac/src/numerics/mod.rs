//! Dense-tensor compute substrate: tensors, reverse-mode differentiation,
//! kernels, optimizer, schedule, and the finite-difference harness.

pub mod gradcheck;
pub mod kernels;
pub mod optim;
pub mod real;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{AdamWConfig, LrSchedule, OptimizerState};
pub use real::Real;
pub use rng::{RngKey, Stream};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{ParamRef, ParamStore, Tensor};
