//! Soft-label compression for dataset distillation: a vector-quantized
//! autoencoder codec, reference baselines, storage accounting, a binary
//! archive format and a small knowledge-distillation harness.

pub mod archive;
pub mod baselines;
pub mod budget;
pub mod cli;
pub mod codec;
pub mod error;
pub mod kd;
pub mod labels;
pub mod lossy;
pub mod optim;
mod wire;

pub use error::{Error, Result};
pub use labels::{LogitMatrix, Precision, SoftLabelMatrix};
