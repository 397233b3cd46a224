//! Minimal dense-tensor engine: `f64` tensors, a reverse-mode tape with the
//! handful of operations the anomaly-detection networks need, an Adam
//! optimizer, finite-difference gradient checking and a seeded RNG.

mod adam;
mod gradcheck;
mod kernels;
pub mod ops;
mod rng;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_many};
pub use rng::{rng_stream, standard_normal, Rng};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("index error: {0}")]
    Index(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;
