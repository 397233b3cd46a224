use neutral_tensor::{Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::mask::batched;
use super::{check_params, init_slots, Cursor, ParamSlot, ResBlock, SampleShape};
use crate::Result;

/// Stream offset keeping encoder draws apart from the mask streams.
const ENCODER_STREAM: u64 = 1 << 32;

/// Residual conv encoder: a stride-1 stem block, stride-2 stages, then one
/// top convolution whose output is flattened.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvEncoderSpec {
    pub stem: usize,
    pub stages: Vec<usize>,
    pub top_kernel: usize,
    pub top_channels: usize,
}

impl ConvEncoderSpec {
    /// Per-dataset architectures; `None` for unknown names.
    pub fn preset(dataset: &str) -> Option<Self> {
        let (stages, top_kernel, top_channels): (&[usize], usize, usize) =
            match dataset.to_ascii_lowercase().as_str() {
                "sad" | "spokenarabicdigits" => (&[32, 64, 128, 256], 6, 32),
                "natops" => (&[32, 64, 128, 256], 4, 64),
                "ct" | "charactertrajectories" => (&[32, 64, 128, 256, 512, 1024], 3, 64),
                "epilepsy" => (&[32, 64, 128, 256, 512, 1024], 4, 128),
                "rs" | "racketsports" => (&[32, 64, 128], 4, 64),
                _ => return None,
            };
        Some(Self {
            stem: 32,
            stages: stages.to_vec(),
            top_kernel,
            top_channels,
        })
    }

    /// Fallback for series without a preset: halve the length until it is
    /// at most 4, widths doubling from 32 up to 256, top kernel covering
    /// what is left.
    pub fn generic(length: usize, embedding: usize) -> Self {
        let mut stages = Vec::new();
        let mut len = length;
        let mut width = 32;
        while len > 4 {
            stages.push(width);
            width = (width * 2).min(256);
            len = (len - 1) / 2 + 1;
        }
        Self {
            stem: 32,
            stages,
            top_kernel: len.max(1),
            top_channels: embedding,
        }
    }

    fn blocks(&self, channels: usize) -> Vec<ResBlock> {
        let mut blocks = vec![ResBlock {
            c_in: channels,
            c_out: self.stem,
            stride: 1,
        }];
        let mut c = self.stem;
        for &w in &self.stages {
            blocks.push(ResBlock {
                c_in: c,
                c_out: w,
                stride: 2,
            });
            c = w;
        }
        blocks
    }

    fn last_channels(&self) -> usize {
        self.stages.last().copied().unwrap_or(self.stem)
    }

    /// Length reaching the top conv and the padding it gets. When the
    /// sequence is shorter than the kernel, it is zero padded on both sides
    /// so that at least one output position exists.
    fn top_geometry(&self, length: usize) -> (usize, usize) {
        let len = self.blocks(1).iter().fold(length, |l, b| b.out_len(l));
        let pad = self.top_kernel.saturating_sub(len).div_ceil(2);
        (len, pad)
    }
}

/// Encoder architecture bound to a sample shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderSpec {
    Conv {
        channels: usize,
        length: usize,
        conv: ConvEncoderSpec,
    },
    /// Bias-free linear layers; `widths[0]` is the input dimension and the
    /// last entry the embedding dimension.
    Dense { widths: Vec<usize> },
}

impl EncoderSpec {
    /// The documented architecture for `dataset`, or a generic one sized
    /// from the sample shape.
    pub fn for_dataset(dataset: &str, shape: SampleShape) -> Self {
        match shape {
            SampleShape::Series { channels, length } => EncoderSpec::Conv {
                channels,
                length,
                conv: ConvEncoderSpec::preset(dataset)
                    .unwrap_or_else(|| ConvEncoderSpec::generic(length, 32)),
            },
            SampleShape::Table { features } => {
                let embedding = if dataset.eq_ignore_ascii_case("thyroid") { 24 } else { 32 };
                EncoderSpec::dense(features, embedding)
            }
        }
    }

    /// Five layers whose widths interpolate geometrically from `features`
    /// to `embedding`, never narrower than `embedding`.
    pub fn dense(features: usize, embedding: usize) -> Self {
        const LAYERS: i32 = 5;
        let ratio = embedding as f64 / features as f64;
        let widths = (0..=LAYERS)
            .map(|i| match i {
                0 => features,
                LAYERS => embedding,
                _ => ((features as f64) * ratio.powf(i as f64 / LAYERS as f64)).round().max(embedding as f64) as usize,
            })
            .collect();
        EncoderSpec::Dense { widths }
    }

    /// Same architecture with a different output dimension (used for the
    /// transformation classifier).
    pub fn with_embedding(mut self, dim: usize) -> Self {
        match &mut self {
            EncoderSpec::Conv { conv, .. } => conv.top_channels = dim,
            EncoderSpec::Dense { widths } => *widths.last_mut().expect("nonempty") = dim,
        }
        self
    }

    pub fn sample_shape(&self) -> SampleShape {
        match self {
            EncoderSpec::Conv { channels, length, .. } => SampleShape::Series {
                channels: *channels,
                length: *length,
            },
            EncoderSpec::Dense { widths } => SampleShape::Table { features: widths[0] },
        }
    }

    pub fn embedding_dim(&self) -> usize {
        match self {
            EncoderSpec::Conv { length, conv, .. } => {
                let (len, pad) = conv.top_geometry(*length);
                conv.top_channels * (len + 2 * pad - conv.top_kernel + 1)
            }
            EncoderSpec::Dense { widths } => *widths.last().expect("nonempty"),
        }
    }

    pub(crate) fn slots(&self) -> Vec<ParamSlot> {
        match self {
            EncoderSpec::Conv { channels, conv, .. } => {
                let mut s = Vec::new();
                for (i, b) in conv.blocks(*channels).iter().enumerate() {
                    s.extend(b.slots(&format!("encoder.block{i}")));
                }
                s.push(ParamSlot::new(
                    "encoder.top",
                    &[conv.top_channels, conv.last_channels(), conv.top_kernel],
                ));
                s
            }
            EncoderSpec::Dense { widths } => widths
                .windows(2)
                .enumerate()
                .map(|(i, w)| ParamSlot::new(format!("encoder.fc{i}"), &[w[1], w[0]]))
                .collect(),
        }
    }
}

/// The feature extractor `f_φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderNet {
    spec: EncoderSpec,
    params: Vec<Tensor>,
}

impl EncoderNet {
    pub fn init(spec: EncoderSpec, seed: u64) -> Self {
        let params = init_slots(&spec.slots(), seed, ENCODER_STREAM);
        Self { spec, params }
    }

    pub fn from_params(spec: EncoderSpec, params: Vec<Tensor>) -> Result<Self> {
        check_params(&spec.slots(), &params)?;
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn embedding_dim(&self) -> usize {
        self.spec.embedding_dim()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        self.spec.slots().into_iter().map(|s| s.name).collect()
    }

    pub fn set_params(&mut self, params: &[Tensor]) -> Result<()> {
        check_params(&self.spec.slots(), params)?;
        self.params = params.to_vec();
        Ok(())
    }

    /// Embeds a batch `[B, ...]` into `[B, E]`.
    pub fn forward<'t>(&self, vars: &[Var<'t>], x: Var<'t>) -> Result<Var<'t>> {
        let shape = x.shape();
        self.spec.sample_shape().check_batch(&shape)?;
        let batch = shape[0];
        let mut p = Cursor::new(vars);
        let out = match &self.spec {
            EncoderSpec::Conv {
                channels,
                length,
                conv,
            } => {
                let mut h = x;
                for b in conv.blocks(*channels) {
                    h = b.forward(&mut p, h)?;
                }
                let (_, pad) = conv.top_geometry(*length);
                let h = h.conv1d(p.next()?, 1, pad)?;
                let numel: usize = h.shape()[1..].iter().product();
                h.reshape(&[batch, numel])?
            }
            EncoderSpec::Dense { widths } => {
                let mut h = x;
                for i in 0..widths.len() - 1 {
                    h = h.linear(p.next()?)?;
                    if i + 2 < widths.len() {
                        h = h.relu();
                    }
                }
                h
            }
        };
        p.finish()?;
        Ok(out)
    }

    /// Embedding of a single sample.
    pub fn embed(&self, x: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let vars = super::bind(&tape, &self.params, false);
        let out = self.forward(&vars, tape.constant(batched(x)?))?;
        Ok(out.value().reshape(&[self.embedding_dim()])?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use neutral_tensor::{TensorError, rng_stream, standard_normal};

    fn sample(shape: &[usize]) -> Tensor {
        let mut rng = rng_stream(3, 0);
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| standard_normal(&mut rng)).collect()).unwrap()
    }

    fn embed_len(name: &str, shape: SampleShape) -> usize {
        let spec = EncoderSpec::for_dataset(name, shape);
        let enc = EncoderNet::init(spec, 1);
        let z = enc.embed(&sample(&shape.dims())).unwrap();
        assert_eq!(z.numel(), enc.embedding_dim());
        z.numel()
    }

    #[test]
    fn documented_embedding_sizes() {
        assert_eq!(embed_len("sad", SampleShape::Series { channels: 13, length: 50 }), 32);
        assert_eq!(embed_len("epilepsy", SampleShape::Series { channels: 3, length: 203 }), 128);
        assert_eq!(embed_len("thyroid", SampleShape::Table { features: 6 }), 24);
        assert_eq!(embed_len("arrhythmia", SampleShape::Table { features: 274 }), 32);
    }

    #[test]
    fn remaining_presets_reduce_to_one_position() {
        assert_eq!(embed_len("natops", SampleShape::Series { channels: 24, length: 51 }), 64);
        assert_eq!(embed_len("ct", SampleShape::Series { channels: 3, length: 182 }), 64);
        assert_eq!(embed_len("rs", SampleShape::Series { channels: 6, length: 30 }), 64);
    }

    #[test]
    fn generic_series_encoder() {
        assert_eq!(embed_len("toy", SampleShape::Series { channels: 2, length: 37 }), 32);
        assert_eq!(embed_len("toy", SampleShape::Series { channels: 1, length: 3 }), 32);
    }

    #[test]
    fn dense_widths_are_geometric() {
        let EncoderSpec::Dense { widths } = EncoderSpec::dense(274, 32) else {
            unreachable!()
        };
        assert_eq!(widths.len(), 6);
        assert_eq!((widths[0], widths[5]), (274, 32));
        assert!(widths.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn wrong_sample_shape_is_rejected() {
        let enc = EncoderNet::init(EncoderSpec::dense(6, 24), 0);
        assert!(matches!(
            enc.embed(&sample(&[5])),
            Err(Error::Tensor(TensorError::Dimension(_)))
        ));
    }

    #[test]
    fn kaiming_std_matches_fan_in() {
        let spec = EncoderSpec::Conv {
            channels: 64,
            length: 16,
            conv: ConvEncoderSpec {
                stem: 64,
                stages: vec![],
                top_kernel: 3,
                top_channels: 8,
            },
        };
        let enc = EncoderNet::init(spec, 9);
        // block0.conv1 is 64×64×3 = 12288 entries
        let k = &enc.params()[0];
        assert_eq!(k.shape(), &[64, 64, 3]);
        let n = k.numel() as f64;
        let mean = k.data().iter().sum::<f64>() / n;
        let std = (k.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let target = (2.0f64 / (64.0 * 3.0)).sqrt();
        assert!((std / target - 1.0).abs() < 0.2, "{std} vs {target}");
    }

    #[test]
    fn init_is_seed_deterministic() {
        let spec = EncoderSpec::dense(6, 24);
        assert_eq!(EncoderNet::init(spec.clone(), 4), EncoderNet::init(spec.clone(), 4));
        assert_ne!(EncoderNet::init(spec.clone(), 4), EncoderNet::init(spec, 5));
    }
}
