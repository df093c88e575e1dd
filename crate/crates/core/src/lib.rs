//! Inter-beat-interval estimation from 1D cardiac waveforms.

pub mod commands;
pub mod dataset;
mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod postprocess;
pub mod seed;
pub mod sigfile;
pub mod signalgen;
pub mod train;
pub mod windowing;

pub use error::{Error, Result};
