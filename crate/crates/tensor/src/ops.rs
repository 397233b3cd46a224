//! Composite operations built from tape primitives.

use crate::{Result, TensorError, Var};

/// Cosine similarity of two equal-length vectors, with each norm clamped
/// below by `eps` so the gradient stays defined at the origin.
pub fn cosine_similarity<'t>(a: Var<'t>, b: Var<'t>, eps: f64) -> Result<Var<'t>> {
    if a.shape() != b.shape() || a.shape().len() != 1 {
        return Err(TensorError::Dimension(format!(
            "cosine_similarity needs two equal 1-D shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.normalize(eps).mul(b.normalize(eps))?.sum())
}

/// `log Σ exp(v_i)` of a 1-D tensor as a scalar.
pub fn logsumexp(values: Var<'_>) -> Result<Var<'_>> {
    if values.shape().len() != 1 {
        return Err(TensorError::Dimension(format!(
            "logsumexp expects a 1-D tensor, got {:?}",
            values.shape()
        )));
    }
    values.logsumexp(None)
}
