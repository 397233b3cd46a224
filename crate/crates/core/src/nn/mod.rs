//! The two learnable components: transformation masks and the encoder, in
//! convolutional (time series) and dense (tabular) variants.
//!
//! Every network keeps its parameters as a flat, ordered `Vec<Tensor>`
//! described by a layout of named slots. Forward passes take the matching
//! list of tape variables, so the same code serves training (parameters
//! recorded as gradient leaves) and frozen scoring (recorded as constants).
//! No layer has a bias and instance norm has no affine terms.

mod encoder;
mod fixed;
mod mask;

pub use encoder::{ConvEncoderSpec, EncoderNet, EncoderSpec};
pub use fixed::{fixed_transforms, FixedTransforms, FIXED_VIEW_COUNT};
pub use mask::{MaskNet, MaskSpec, Parametrization, TransformStack};

use neutral_tensor::{rng_stream, standard_normal, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub(crate) const NORM_EPS: f64 = 1e-5;

/// Shape of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleShape {
    Series { channels: usize, length: usize },
    Table { features: usize },
}

impl SampleShape {
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            SampleShape::Series { channels, length } => vec![channels, length],
            SampleShape::Table { features } => vec![features],
        }
    }

    pub fn of(t: &Tensor) -> Result<Self> {
        match *t.shape() {
            [channels, length] => Ok(SampleShape::Series { channels, length }),
            [features] => Ok(SampleShape::Table { features }),
            ref s => Err(Error::Config(format!(
                "samples must be [C, L] series or [D] rows, got {s:?}"
            ))),
        }
    }

    pub fn numel(&self) -> usize {
        self.dims().iter().product()
    }

    /// Checks that a batch `[B, ...]` carries samples of this shape.
    pub(crate) fn check_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.len() < 2 || batch[1..] != self.dims()[..] {
            return Err(neutral_tensor::TensorError::Dimension(format!(
                "expected a batch of {:?} samples, got {batch:?}",
                self.dims()
            ))
            .into());
        }
        Ok(())
    }
}

/// One named parameter tensor in a network layout.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamSlot {
    fn new(name: impl Into<String>, shape: &[usize]) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
        }
    }

    /// Fan-in: every input dimension except the leading output axis.
    fn fan_in(&self) -> usize {
        self.shape[1..].iter().product::<usize>().max(1)
    }
}

/// Kaiming-normal draws for every slot, in layout order, from one seeded
/// stream.
pub(crate) fn init_slots(slots: &[ParamSlot], seed: u64, stream: u64) -> Vec<Tensor> {
    let mut rng = rng_stream(seed, stream);
    slots
        .iter()
        .map(|slot| {
            let std = (2.0 / slot.fan_in() as f64).sqrt();
            let n = slot.shape.iter().product();
            let data = (0..n).map(|_| std * standard_normal(&mut rng)).collect();
            Tensor::new(slot.shape.clone(), data).expect("slot shape")
        })
        .collect()
}

pub(crate) fn zero_slots(slots: &[ParamSlot]) -> Vec<Tensor> {
    slots
        .iter()
        .map(|s| Tensor::zeros(&s.shape).expect("slot shape"))
        .collect()
}

pub(crate) fn check_params(slots: &[ParamSlot], params: &[Tensor]) -> Result<()> {
    if slots.len() != params.len() {
        return Err(Error::Config(format!(
            "expected {} parameter tensors, got {}",
            slots.len(),
            params.len()
        )));
    }
    for (slot, p) in slots.iter().zip(params) {
        if slot.shape != p.shape() {
            return Err(Error::Config(format!(
                "parameter {} expects shape {:?}, got {:?}",
                slot.name,
                slot.shape,
                p.shape()
            )));
        }
    }
    Ok(())
}

/// Records `params` on `tape`, as gradient leaves when `trainable`.
pub fn bind<'t>(tape: &'t Tape, params: &[Tensor], trainable: bool) -> Vec<Var<'t>> {
    params
        .iter()
        .map(|p| {
            if trainable {
                tape.param(p.clone())
            } else {
                tape.constant(p.clone())
            }
        })
        .collect()
}

/// Sequential reader over bound parameter variables.
pub(crate) struct Cursor<'a, 't> {
    vars: &'a [Var<'t>],
    pos: usize,
}

impl<'a, 't> Cursor<'a, 't> {
    pub fn new(vars: &'a [Var<'t>]) -> Self {
        Self { vars, pos: 0 }
    }

    pub fn next(&mut self) -> Result<Var<'t>> {
        let v = self
            .vars
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Config("parameter list exhausted".into()))?;
        self.pos += 1;
        Ok(v)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.vars.len() {
            return Err(Error::Config(format!(
                "{} parameter tensors left unused",
                self.vars.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Residual block geometry: two kernel-3 convolutions, the first carrying
/// the stride, and a 1×1 projection skip when shape changes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ResBlock {
    pub c_in: usize,
    pub c_out: usize,
    pub stride: usize,
}

impl ResBlock {
    pub fn has_projection(&self) -> bool {
        self.c_in != self.c_out || self.stride != 1
    }

    pub fn slots(&self, prefix: &str) -> Vec<ParamSlot> {
        let mut s = vec![
            ParamSlot::new(format!("{prefix}.conv1"), &[self.c_out, self.c_in, 3]),
            ParamSlot::new(format!("{prefix}.conv2"), &[self.c_out, self.c_out, 3]),
        ];
        if self.has_projection() {
            s.push(ParamSlot::new(format!("{prefix}.skip"), &[self.c_out, self.c_in, 1]));
        }
        s
    }

    /// `relu(IN(conv(relu(IN(conv(x)))))) + skip(x)`
    pub fn forward<'t>(&self, p: &mut Cursor<'_, 't>, x: Var<'t>) -> Result<Var<'t>> {
        let conv1 = p.next()?;
        let conv2 = p.next()?;
        let h = x
            .conv1d(conv1, self.stride, 1)?
            .instance_norm(NORM_EPS)
            .relu()
            .conv1d(conv2, 1, 1)?
            .instance_norm(NORM_EPS)
            .relu();
        let skip = if self.has_projection() {
            x.conv1d(p.next()?, self.stride, 0)?
        } else {
            x
        };
        Ok(h.add(skip)?)
    }

    pub fn out_len(&self, len: usize) -> usize {
        (len + 2 - 3) / self.stride + 1
    }
}
