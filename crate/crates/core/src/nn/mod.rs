//! A small CPU neural-network toolkit with hand-written backward passes.

pub mod gradcheck;
mod layers;
pub mod ops;
mod optim;
mod scalar;
mod tensor;

pub use layers::{
    he_uniform, Activation, ActivationKind, BatchNorm1d, Conv1d, Dense, DepthwiseSeparable,
    Flatten, GlobalAvgPool, Layer, MaxPool1d, Mode, Param,
};
pub use optim::{adam_step, lr_schedule, AdamConfig, AdamState, StagedSchedule};
pub use scalar::Scalar;
pub use tensor::Tensor;
