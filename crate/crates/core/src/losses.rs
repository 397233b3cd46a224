//! Training objectives at the embedding level: the deterministic
//! contrastive loss (DCL), transformation prediction (L_P) and the
//! minibatch contrastive loss (L_C). All softmax ratios are evaluated in
//! log space.
//!
//! Embeddings for DCL are passed as one `[B, K+1, E]` variable whose slot 0
//! holds `f(x)` and slots `1..=K` hold `f(T_k(x))`.

use std::sync::Arc;

use neutral_tensor::{Tape, Tensor, TensorError, Var};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub(crate) const COSINE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DclConfig {
    pub temperature: f64,
    pub k: usize,
}

impl DclConfig {
    pub fn new(temperature: f64, k: usize) -> Result<Self> {
        let c = Self { temperature, k };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.k < 2 {
            return Err(Error::Config(format!(
                "K = {} transformations; the contrastive denominator needs K >= 2",
                self.k
            )));
        }
        Ok(())
    }
}

/// Score `S(x)` split into its per-transformation terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub total: f64,
    pub per_transformation: Vec<f64>,
}

impl ScoreBreakdown {
    pub fn from_terms(terms: &[f64]) -> Self {
        Self {
            total: terms.iter().sum(),
            per_transformation: terms.to_vec(),
        }
    }

    /// Per-transformation shares of the total, a point on the simplex.
    pub fn shares(&self) -> Vec<f64> {
        if self.total > 0.0 {
            self.per_transformation.iter().map(|t| t / self.total).collect()
        } else {
            let k = self.per_transformation.len() as f64;
            vec![1.0 / k; self.per_transformation.len()]
        }
    }
}

/// `exp(sim(z_a, z_b) / τ)`
pub fn score_h(z_a: &Tensor, z_b: &Tensor, temperature: f64) -> Result<f64> {
    let tape = Tape::new();
    let sim = neutral_tensor::ops::cosine_similarity(
        tape.constant(z_a.clone()),
        tape.constant(z_b.clone()),
        COSINE_EPS,
    )?;
    Ok((sim.value().item()? / temperature).exp())
}

fn embedding_dims(z: &Var<'_>) -> Result<(usize, usize, usize)> {
    match *z.shape() {
        [b, k1, e] if k1 >= 3 => Ok((b, k1 - 1, e)),
        [_, k1, _] => Err(Error::Config(format!(
            "K = {} transformations; the contrastive denominator needs K >= 2",
            k1.saturating_sub(1)
        ))),
        ref s => Err(TensorError::Dimension(format!(
            "expected [B, K+1, E] embeddings, got {s:?}"
        ))
        .into()),
    }
}

/// Per-sample, per-transformation DCL terms `[B, K]`:
/// `−s(k,0) + log Σ_{l≠k, l∈0..K} exp s(k,l)` with `s = cos/τ`.
pub fn dcl_terms<'t>(z: Var<'t>, temperature: f64) -> Result<Var<'t>> {
    let (b, k, _) = embedding_dims(&z)?;
    let k1 = k + 1;
    let n = z.normalize(COSINE_EPS);
    let sims = n.bmm_t(n)?.scale(1.0 / temperature);
    // rows 1..=K of every [K+1, K+1] block
    let rows: Arc<[usize]> = (0..b)
        .flat_map(|i| (k1..k1 * k1).map(move |j| i * k1 * k1 + j))
        .collect();
    let view_rows = sims.gather(rows, &[b, k, k1])?;
    let mask: Arc<[bool]> = (0..b * k * k1)
        .map(|i| {
            let (row, col) = ((i / k1) % k, i % k1);
            col != row + 1
        })
        .collect();
    let lse = view_rows.logsumexp(Some(mask))?;
    let pos: Arc<[usize]> = (0..b * k).map(|i| i * k1).collect();
    let positive = view_rows.gather(pos, &[b, k])?;
    Ok(lse.sub(positive)?)
}

/// Batch-mean DCL from `[B, K+1, E]` embeddings.
pub fn dcl_loss<'t>(z: Var<'t>, temperature: f64) -> Result<Var<'t>> {
    Ok(dcl_terms(z, temperature)?.sum_last().mean())
}

/// Transformation-prediction terms `[B, K]` from classifier outputs
/// `[B, K, K]`, where `logits[b, k, :]` are the class scores for view `k`.
pub fn tp_terms<'t>(logits: Var<'t>) -> Result<Var<'t>> {
    let (b, k) = match *logits.shape() {
        [b, k, k2] if k == k2 && k >= 2 => (b, k),
        ref s => {
            return Err(TensorError::Dimension(format!(
                "transformation prediction needs [B, K, K] logits with K >= 2, got {s:?}"
            ))
            .into())
        }
    };
    let lse = logits.logsumexp(None)?;
    let diag: Arc<[usize]> = (0..b * k).map(|i| i * k + i % k).collect();
    Ok(lse.sub(logits.gather(diag, &[b, k])?)?)
}

/// Batch-mean `L_P`.
pub fn tp_loss<'t>(logits: Var<'t>) -> Result<Var<'t>> {
    Ok(tp_terms(logits)?.sum_last().mean())
}

/// Minibatch contrastive loss, summed over both directions of every
/// positive pair. `z1[i]` and `z2[i]` are two views of sample `i`.
pub fn simclr_loss<'t>(z1: Var<'t>, z2: Var<'t>, temperature: f64) -> Result<Var<'t>> {
    let (s1, s2) = (z1.shape(), z2.shape());
    if s1.len() != 2 || s1 != s2 {
        return Err(TensorError::Dimension(format!(
            "L_C needs two [N, E] embedding sets, got {s1:?} and {s2:?}"
        ))
        .into());
    }
    let n = s1[0];
    let m = 2 * n;
    let z = z1.tape().concat(&[z1, z2])?.normalize(COSINE_EPS);
    let g = z.bmm_t(z)?.scale(1.0 / temperature);
    if n == 1 {
        // each row's only candidate is its positive
        return Ok(g.sum().scale(0.0));
    }
    let mask: Arc<[bool]> = (0..m * m).map(|i| i / m != i % m).collect();
    let lse = g.logsumexp(Some(mask))?;
    let pair: Arc<[usize]> = (0..m).map(|r| r * m + (r + n) % m).collect();
    Ok(lse.sub(g.gather(pair, &[m])?)?.sum())
}
