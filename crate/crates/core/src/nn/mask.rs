use neutral_tensor::{Tape, Tensor, TensorError, Var};
use serde::{Deserialize, Serialize};

use super::{check_params, init_slots, zero_slots, Cursor, ParamSlot, ResBlock, SampleShape};
use crate::{Error, Result};

const MASK_BLOCKS: usize = 3;
const MIN_DENSE_HIDDEN: usize = 32;

/// How a mask output is combined with the input to form a view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// `T(x) = M(x)`
    FeedForward,
    /// `T(x) = M(x) + x`
    Residual,
    /// `T(x) = M(x) ⊙ x`, with a sigmoid-terminated mask
    Multiplicative,
}

impl Parametrization {
    pub const ALL: [Parametrization; 3] = [
        Parametrization::FeedForward,
        Parametrization::Residual,
        Parametrization::Multiplicative,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Parametrization::FeedForward => "feed_forward",
            Parametrization::Residual => "residual",
            Parametrization::Multiplicative => "multiplicative",
        }
    }
}

impl std::str::FromStr for Parametrization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "feed_forward" | "feedforward" => Ok(Parametrization::FeedForward),
            "residual" => Ok(Parametrization::Residual),
            "multiplicative" => Ok(Parametrization::Multiplicative),
            other => Err(Error::Config(format!(
                "unknown parametrization {other:?} (expected feed_forward, residual or multiplicative)"
            ))),
        }
    }
}

impl std::fmt::Display for Parametrization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Mask architecture. Both variants map a sample onto its own shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSpec {
    /// Bottom conv, three residual blocks at the data width, top conv; all
    /// kernel 3, stride 1.
    Conv { channels: usize },
    /// Two linear layers with an intermediate ReLU of width
    /// `max(features, 32)`.
    Dense { features: usize },
}

impl MaskSpec {
    pub fn for_shape(shape: SampleShape) -> Self {
        match shape {
            SampleShape::Series { channels, .. } => MaskSpec::Conv { channels },
            SampleShape::Table { features } => MaskSpec::Dense { features },
        }
    }

    pub(crate) fn slots(&self, prefix: &str) -> Vec<ParamSlot> {
        match *self {
            MaskSpec::Conv { channels: c } => {
                let mut s = vec![ParamSlot::new(format!("{prefix}.bottom"), &[c, c, 3])];
                for i in 0..MASK_BLOCKS {
                    let block = ResBlock {
                        c_in: c,
                        c_out: c,
                        stride: 1,
                    };
                    s.extend(block.slots(&format!("{prefix}.block{i}")));
                }
                s.push(ParamSlot::new(format!("{prefix}.top"), &[c, c, 3]));
                s
            }
            MaskSpec::Dense { features: d } => {
                let h = d.max(MIN_DENSE_HIDDEN);
                vec![
                    ParamSlot::new(format!("{prefix}.fc1"), &[h, d]),
                    ParamSlot::new(format!("{prefix}.fc2"), &[d, h]),
                ]
            }
        }
    }
}

/// One learnable mask `M_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskNet {
    spec: MaskSpec,
    sigmoid: bool,
    params: Vec<Tensor>,
}

impl MaskNet {
    pub fn init(spec: MaskSpec, sigmoid: bool, seed: u64, stream: u64) -> Self {
        let params = init_slots(&spec.slots("m"), seed, stream);
        Self {
            spec,
            sigmoid,
            params,
        }
    }

    pub fn zeros(spec: MaskSpec, sigmoid: bool) -> Self {
        Self {
            spec,
            sigmoid,
            params: zero_slots(&spec.slots("m")),
        }
    }

    pub fn from_params(spec: MaskSpec, sigmoid: bool, params: Vec<Tensor>) -> Result<Self> {
        check_params(&spec.slots("m"), &params)?;
        Ok(Self {
            spec,
            sigmoid,
            params,
        })
    }

    pub fn spec(&self) -> MaskSpec {
        self.spec
    }

    pub fn has_sigmoid(&self) -> bool {
        self.sigmoid
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    /// Applies the mask to a batch `[B, ...]` given its bound parameters.
    pub fn forward<'t>(&self, vars: &[Var<'t>], x: Var<'t>) -> Result<Var<'t>> {
        let mut p = Cursor::new(vars);
        let shape = x.shape();
        let out = match self.spec {
            MaskSpec::Conv { channels } => {
                if shape.len() != 3 || shape[1] != channels {
                    return Err(TensorError::Dimension(format!(
                        "conv mask for {channels} channels got batch {shape:?}"
                    ))
                    .into());
                }
                let mut h = x.conv1d(p.next()?, 1, 1)?;
                for _ in 0..MASK_BLOCKS {
                    let block = ResBlock {
                        c_in: channels,
                        c_out: channels,
                        stride: 1,
                    };
                    h = block.forward(&mut p, h)?;
                }
                h.conv1d(p.next()?, 1, 1)?
            }
            MaskSpec::Dense { features } => {
                if shape.len() != 2 || shape[1] != features {
                    return Err(TensorError::Dimension(format!(
                        "dense mask for {features} features got batch {shape:?}"
                    ))
                    .into());
                }
                x.linear(p.next()?)?.relu().linear(p.next()?)?
            }
        };
        p.finish()?;
        Ok(if self.sigmoid { out.sigmoid() } else { out })
    }

    /// `M(x)` for a single sample, outside any training graph.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let vars = super::bind(&tape, &self.params, false);
        let batch = tape.constant(batched(x)?);
        let out = self.forward(&vars, batch)?;
        Ok(out.value().reshape(x.shape())?)
    }
}

pub(crate) fn batched(x: &Tensor) -> Result<Tensor> {
    let mut shape = vec![1];
    shape.extend_from_slice(x.shape());
    Ok(x.reshape(&shape)?)
}

/// `K` learnable transformations sharing one parametrization.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformStack {
    mode: Parametrization,
    masks: Vec<MaskNet>,
}

impl TransformStack {
    /// Randomly initialized stack; mask `k` draws from RNG stream `k + 1`.
    pub fn init(shape: SampleShape, k: usize, mode: Parametrization, seed: u64) -> Result<Self> {
        check_k(k)?;
        let spec = MaskSpec::for_shape(shape);
        let sigmoid = mode == Parametrization::Multiplicative;
        let masks = (0..k)
            .map(|i| MaskNet::init(spec, sigmoid, seed, i as u64 + 1))
            .collect();
        Ok(Self { mode, masks })
    }

    /// Stack with all mask weights zero.
    pub fn zeros(shape: SampleShape, k: usize, mode: Parametrization) -> Result<Self> {
        check_k(k)?;
        let spec = MaskSpec::for_shape(shape);
        let sigmoid = mode == Parametrization::Multiplicative;
        Ok(Self {
            mode,
            masks: vec![MaskNet::zeros(spec, sigmoid); k],
        })
    }

    pub fn from_masks(mode: Parametrization, masks: Vec<MaskNet>) -> Result<Self> {
        check_k(masks.len())?;
        let needs_sigmoid = mode == Parametrization::Multiplicative;
        if masks.iter().any(|m| m.sigmoid != needs_sigmoid) {
            return Err(Error::Config(format!(
                "{mode} parametrization requires sigmoid-final masks: {needs_sigmoid}"
            )));
        }
        Ok(Self { mode, masks })
    }

    pub fn k(&self) -> usize {
        self.masks.len()
    }

    pub fn mode(&self) -> Parametrization {
        self.mode
    }

    pub fn masks(&self) -> &[MaskNet] {
        &self.masks
    }

    pub fn params(&self) -> Vec<Tensor> {
        self.masks.iter().flat_map(|m| m.params.iter().cloned()).collect()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.masks
            .iter()
            .enumerate()
            .flat_map(|(k, m)| m.spec.slots(&format!("mask{k}")))
            .map(|s| s.name)
            .collect()
    }

    pub fn set_params(&mut self, params: &[Tensor]) -> Result<()> {
        let mut offset = 0;
        for m in &mut self.masks {
            let n = m.params.len();
            let chunk = params
                .get(offset..offset + n)
                .ok_or_else(|| Error::Config("too few parameters for transform stack".into()))?;
            check_params(&m.spec.slots("m"), chunk)?;
            m.params = chunk.to_vec();
            offset += n;
        }
        if offset != params.len() {
            return Err(Error::Config("too many parameters for transform stack".into()));
        }
        Ok(())
    }

    /// All `K` views of a batch. `vars` are the stack's bound parameters in
    /// [`TransformStack::params`] order.
    pub fn views<'t>(&self, vars: &[Var<'t>], x: Var<'t>) -> Result<Vec<Var<'t>>> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.k());
        for mask in &self.masks {
            let n = mask.params.len();
            let m = mask.forward(&vars[offset..offset + n], x)?;
            offset += n;
            out.push(self.combine(m, x)?);
        }
        Ok(out)
    }

    /// View `k` (zero-based) of a batch.
    pub fn view<'t>(&self, vars: &[Var<'t>], x: Var<'t>, k: usize) -> Result<Var<'t>> {
        let mask = self.masks.get(k).ok_or_else(|| {
            TensorError::Index(format!("transformation {k} out of range for K={}", self.k()))
        })?;
        let offset: usize = self.masks[..k].iter().map(|m| m.params.len()).sum();
        let m = mask.forward(&vars[offset..offset + mask.params.len()], x)?;
        self.combine(m, x)
    }

    fn combine<'t>(&self, m: Var<'t>, x: Var<'t>) -> Result<Var<'t>> {
        Ok(match self.mode {
            Parametrization::FeedForward => m,
            Parametrization::Residual => m.add(x)?,
            Parametrization::Multiplicative => m.mul(x)?,
        })
    }

    /// `T_k(x)` for a single sample, outside any training graph.
    pub fn transform(&self, x: &Tensor, k: usize) -> Result<Tensor> {
        let tape = Tape::new();
        let vars = super::bind(&tape, &self.params(), false);
        let batch = tape.constant(batched(x)?);
        Ok(self.view(&vars, batch, k)?.value().reshape(x.shape())?)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Config(format!(
            "K = {k} transformations; the contrastive denominator needs K >= 2"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use neutral_tensor::{rng_stream, standard_normal};

    fn series(c: usize, l: usize, seed: u64) -> Tensor {
        let mut rng = rng_stream(seed, 9);
        Tensor::new(vec![c, l], (0..c * l).map(|_| standard_normal(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn zero_mask_outputs() {
        let x = series(3, 20, 1);
        let plain = MaskNet::zeros(MaskSpec::Conv { channels: 3 }, false);
        assert!(plain.apply(&x).unwrap().data().iter().all(|&v| v == 0.0));
        let sig = MaskNet::zeros(MaskSpec::Conv { channels: 3 }, true);
        assert!(sig.apply(&x).unwrap().data().iter().all(|&v| v == 0.5));
        let dense = MaskNet::zeros(MaskSpec::Dense { features: 4 }, true);
        assert!(dense.apply(&Tensor::vector(&[1.0, -2.0, 3.0, 0.5])).unwrap().data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn random_mask_preserves_epilepsy_shape() {
        let x = series(3, 203, 2);
        let m = MaskNet::init(MaskSpec::Conv { channels: 3 }, false, 5, 1);
        let y = m.apply(&x).unwrap();
        assert_eq!(y.shape(), &[3, 203]);
        assert!(y.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn sigmoid_mask_lies_in_unit_interval() {
        let x = series(2, 30, 3);
        let m = MaskNet::init(MaskSpec::Conv { channels: 2 }, true, 5, 1);
        assert!(m.apply(&x).unwrap().data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn zero_initialized_parametrizations() {
        let shape = SampleShape::Series { channels: 2, length: 16 };
        let x = series(2, 16, 4);
        let res = TransformStack::zeros(shape, 3, Parametrization::Residual).unwrap();
        assert_eq!(res.transform(&x, 1).unwrap(), x);
        let mul = TransformStack::zeros(shape, 3, Parametrization::Multiplicative).unwrap();
        assert_eq!(mul.transform(&x, 2).unwrap(), x.map(|v| 0.5 * v));
        let ff = TransformStack::zeros(shape, 3, Parametrization::FeedForward).unwrap();
        assert!(ff.transform(&x, 0).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_range_view_is_an_index_error() {
        let shape = SampleShape::Table { features: 3 };
        let stack = TransformStack::zeros(shape, 2, Parametrization::Residual).unwrap();
        let err = stack.transform(&Tensor::vector(&[1.0, 2.0, 3.0]), 2).unwrap_err();
        assert!(matches!(err, Error::Tensor(TensorError::Index(_))), "{err}");
    }

    #[test]
    fn k_below_two_is_rejected() {
        let shape = SampleShape::Table { features: 3 };
        assert!(matches!(
            TransformStack::init(shape, 1, Parametrization::Residual, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn shape_mismatch_is_a_dimension_error() {
        let m = MaskNet::zeros(MaskSpec::Dense { features: 4 }, false);
        let err = m.apply(&Tensor::vector(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::Tensor(TensorError::Dimension(_))));
    }

    #[test]
    fn param_names_are_unique_and_bias_free() {
        let shape = SampleShape::Series { channels: 3, length: 10 };
        let stack = TransformStack::init(shape, 4, Parametrization::Residual, 1).unwrap();
        let names = stack.param_names();
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert!(names.iter().all(|n| !n.contains("bias")));
        assert_eq!(names.len(), stack.params().len());
    }
}
