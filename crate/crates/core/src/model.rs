//! A complete detector: transformations plus encoder, with the batch
//! objective and per-sample scoring built from them.

use neutral_tensor::{Tape, Tensor, Var};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::losses::{dcl_terms, tp_terms, DclConfig, ScoreBreakdown};
use crate::nn::{
    bind, EncoderNet, EncoderSpec, FixedTransforms, Parametrization, SampleShape, TransformStack,
    FIXED_VIEW_COUNT,
};
use crate::{Error, Result};

/// Samples scored per forward pass.
const SCORE_CHUNK: usize = 128;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Learned transformations trained on the deterministic contrastive loss.
    #[default]
    Dcl,
    /// Hand-crafted time-series views with a transformation classifier.
    TpFixed,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "dcl" => Ok(Objective::Dcl),
            "tp_fixed" => Ok(Objective::TpFixed),
            other => Err(Error::Config(format!(
                "unknown objective {other:?} (expected dcl or tp_fixed)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Transformations {
    Learned(TransformStack),
    Fixed(FixedTransforms),
}

impl Transformations {
    pub fn k(&self) -> usize {
        match self {
            Transformations::Learned(s) => s.k(),
            Transformations::Fixed(f) => f.k(),
        }
    }

    fn params(&self) -> Vec<Tensor> {
        match self {
            Transformations::Learned(s) => s.params(),
            Transformations::Fixed(_) => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub transforms: Transformations,
    pub encoder: EncoderNet,
    pub temperature: f64,
}

impl Model {
    /// Learned transformations and encoder, randomly initialized.
    pub fn dcl(
        encoder: EncoderSpec,
        k: usize,
        mode: Parametrization,
        temperature: f64,
        seed: u64,
    ) -> Result<Self> {
        DclConfig::new(temperature, k)?;
        let stack = TransformStack::init(encoder.sample_shape(), k, mode, seed)?;
        Ok(Self {
            transforms: Transformations::Learned(stack),
            encoder: EncoderNet::init(encoder, seed),
            temperature,
        })
    }

    /// Fixed-transformation baseline; the encoder becomes a 12-way
    /// classifier.
    pub fn tp_fixed(encoder: EncoderSpec, seed: u64) -> Result<Self> {
        if !matches!(encoder.sample_shape(), SampleShape::Series { .. }) {
            return Err(Error::Config(
                "the fixed-transformation objective is defined for time series only".into(),
            ));
        }
        Ok(Self {
            transforms: Transformations::Fixed(FixedTransforms),
            encoder: EncoderNet::init(encoder.with_embedding(FIXED_VIEW_COUNT), seed),
            temperature: 1.0,
        })
    }

    pub fn objective(&self) -> Objective {
        match self.transforms {
            Transformations::Learned(_) => Objective::Dcl,
            Transformations::Fixed(_) => Objective::TpFixed,
        }
    }

    pub fn k(&self) -> usize {
        self.transforms.k()
    }

    pub fn sample_shape(&self) -> SampleShape {
        self.encoder.spec().sample_shape()
    }

    /// Transformation parameters followed by encoder parameters.
    pub fn params(&self) -> Vec<Tensor> {
        let mut p = self.transforms.params();
        p.extend(self.encoder.params().iter().cloned());
        p
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = match &self.transforms {
            Transformations::Learned(s) => s.param_names(),
            Transformations::Fixed(_) => Vec::new(),
        };
        names.extend(self.encoder.param_names());
        names
    }

    pub fn set_params(&mut self, params: &[Tensor]) -> Result<()> {
        let n = self.transforms.params().len();
        if params.len() < n {
            return Err(Error::Config("too few parameters for model".into()));
        }
        if let Transformations::Learned(s) = &mut self.transforms {
            s.set_params(&params[..n])?;
        }
        self.encoder.set_params(&params[n..])
    }

    /// Per-sample, per-transformation objective terms `[B, K]` for a batch
    /// `[B, ...]`, with parameters bound as `vars` (in [`Model::params`]
    /// order).
    pub fn terms<'t>(&self, tape: &'t Tape, vars: &[Var<'t>], batch: &Tensor) -> Result<Var<'t>> {
        self.sample_shape().check_batch(batch.shape())?;
        let b = batch.shape()[0];
        let k = self.k();
        let n_t = self.transforms.params().len();
        let (t_vars, e_vars) = vars.split_at(n_t);
        match &self.transforms {
            Transformations::Learned(stack) => {
                let x = tape.constant(batch.clone());
                let mut all = vec![x];
                all.extend(stack.views(t_vars, x)?);
                let z = self.encoder.forward(e_vars, tape.concat(&all)?)?;
                let e = z.shape()[1];
                let z = z.reshape(&[k + 1, b, e])?.swap_leading()?;
                dcl_terms(z, self.temperature)
            }
            Transformations::Fixed(fixed) => {
                let mut views = Vec::with_capacity(k * b);
                for v in 0..k {
                    for i in 0..b {
                        views.push(fixed.view(&batch.index_leading(i)?, v)?);
                    }
                }
                let x = tape.constant(Tensor::stack(&views)?);
                let logits = self.encoder.forward(e_vars, x)?;
                let logits = logits.reshape(&[k, b, k])?.swap_leading()?;
                tp_terms(logits)
            }
        }
    }

    /// Batch-mean objective.
    pub fn loss<'t>(&self, tape: &'t Tape, vars: &[Var<'t>], batch: &Tensor) -> Result<Var<'t>> {
        Ok(self.terms(tape, vars, batch)?.sum_last().mean())
    }

    /// Scores for every sample of a batch `[B, ...]`. Samples never
    /// interact, so the chunking does not change any score.
    pub fn score_batch(&self, batch: &Tensor) -> Result<Vec<ScoreBreakdown>> {
        self.sample_shape().check_batch(batch.shape())?;
        let b = batch.shape()[0];
        let params = self.params();
        let chunks: Vec<(usize, usize)> = (0..b)
            .step_by(SCORE_CHUNK)
            .map(|s| (s, (s + SCORE_CHUNK).min(b)))
            .collect();
        let parts = chunks
            .par_iter()
            .map(|&(s, e)| {
                let slice = slice_leading(batch, s, e)?;
                let tape = Tape::new();
                let vars = bind(&tape, &params, false);
                let terms = self.terms(&tape, &vars, &slice)?.value();
                let k = self.k();
                Ok(terms
                    .data()
                    .chunks_exact(k)
                    .map(ScoreBreakdown::from_terms)
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.into_iter().flatten().collect())
    }

    /// Score of a single sample.
    pub fn anomaly_score(&self, x: &Tensor) -> Result<ScoreBreakdown> {
        let mut shape = vec![1];
        shape.extend_from_slice(x.shape());
        let mut s = self.score_batch(&x.reshape(&shape)?)?;
        Ok(s.remove(0))
    }

    /// The `K` views of one sample (transformed data, not embeddings).
    pub fn views(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        match &self.transforms {
            Transformations::Learned(s) => (0..s.k()).map(|k| s.transform(x, k)).collect(),
            Transformations::Fixed(f) => (0..f.k()).map(|k| f.view(x, k)).collect(),
        }
    }

    /// Embeddings `[K+1, E]` of a sample and its views, original first.
    pub fn embeddings(&self, x: &Tensor) -> Result<Tensor> {
        let mut items = vec![self.encoder.embed(x)?];
        for v in self.views(x)? {
            items.push(self.encoder.embed(&v)?);
        }
        Ok(Tensor::stack(&items)?)
    }
}

/// Rows `start..end` of a tensor along its leading axis.
pub(crate) fn slice_leading(t: &Tensor, start: usize, end: usize) -> Result<Tensor> {
    let inner: usize = t.shape()[1..].iter().product();
    let mut shape = t.shape().to_vec();
    shape[0] = end - start;
    Ok(Tensor::new(shape, t.data()[start * inner..end * inner].to_vec())?)
}

/// Stacks samples, in the order given by `indices`, into one batch.
pub(crate) fn gather_samples(samples: &[Tensor], indices: &[usize]) -> Result<Tensor> {
    let items: Vec<Tensor> = indices.iter().map(|&i| samples[i].clone()).collect();
    Ok(Tensor::stack(&items)?)
}
