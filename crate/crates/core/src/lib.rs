//! Learnable-transformation anomaly detection: mask and encoder networks,
//! the deterministic contrastive loss used for training and scoring,
//! numerical edge-case checks, dataset ingestion, training and evaluation.

pub mod data;
pub mod losses;
pub mod model;
pub mod nn;
pub mod plot;
pub mod theory;
pub mod train;

use neutral_tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("training diverged at epoch {epoch}: {msg}")]
    Diverged { epoch: usize, msg: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
