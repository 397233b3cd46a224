//! Model checkpoints: a JSON manifest plus one little-endian `f32` blob per
//! parameter tensor.

use std::path::Path;

use neutral_tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::data::{ProtocolDescriptor, Standardization};
use crate::model::{Model, Transformations};
use crate::nn::{EncoderNet, EncoderSpec, FixedTransforms, MaskNet, MaskSpec, Parametrization, TransformStack};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const BLOB_DIR: &str = "params";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformManifest {
    Learned { k: usize, mode: Parametrization },
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub dataset: String,
    pub seed: u64,
    pub temperature: f64,
    pub encoder: EncoderSpec,
    pub transforms: TransformManifest,
    pub standardization: Option<Standardization>,
    /// The split the model was trained on, when known.
    #[serde(default)]
    pub protocol: Option<ProtocolDescriptor>,
    pub params: Vec<ParamEntry>,
}

/// A model with the context needed to score raw data.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub dataset: String,
    pub seed: u64,
    pub standardization: Option<Standardization>,
    pub protocol: Option<ProtocolDescriptor>,
}

impl Checkpoint {
    /// Applies the stored standardization (if any) to raw samples.
    pub fn prepare(&self, samples: &[Tensor]) -> Vec<Tensor> {
        match &self.standardization {
            Some(s) => samples.iter().map(|x| s.apply(x)).collect(),
            None => samples.to_vec(),
        }
    }
}

fn blob_name(param: &str) -> String {
    format!("{param}.f32")
}

pub fn save(ckpt: &Checkpoint, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join(BLOB_DIR))?;
    let model = &ckpt.model;
    let names = model.param_names();
    let params = model.params();
    let mut entries = Vec::with_capacity(params.len());
    for (name, p) in names.iter().zip(&params) {
        let file = format!("{BLOB_DIR}/{}", blob_name(name));
        let bytes: Vec<u8> = p.data().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        std::fs::write(dir.join(&file), bytes)?;
        entries.push(ParamEntry {
            name: name.clone(),
            shape: p.shape().to_vec(),
            file,
        });
    }
    let transforms = match &model.transforms {
        Transformations::Learned(s) => TransformManifest::Learned {
            k: s.k(),
            mode: s.mode(),
        },
        Transformations::Fixed(_) => TransformManifest::Fixed,
    };
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dataset: ckpt.dataset.clone(),
        seed: ckpt.seed,
        temperature: model.temperature,
        encoder: model.encoder.spec().clone(),
        transforms,
        standardization: ckpt.standardization.clone(),
        protocol: ckpt.protocol.clone(),
        params: entries,
    };
    std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn read_blob(dir: &Path, entry: &ParamEntry) -> Result<Tensor> {
    let bytes = std::fs::read(dir.join(&entry.file))?;
    let n: usize = entry.shape.iter().product();
    if bytes.len() != 4 * n {
        return Err(Error::Checkpoint(format!(
            "{}: {} bytes for {n} values",
            entry.name,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Tensor::new(entry.shape.clone(), data).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn load(dir: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let version: serde_json::Value = serde_json::from_str(&text)?;
    let found = version.get("format_version").and_then(serde_json::Value::as_u64);
    if found != Some(FORMAT_VERSION as u64) {
        return Err(Error::Checkpoint(format!(
            "format version {found:?} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let manifest: Manifest = serde_json::from_value(version)?;
    let tensors = manifest
        .params
        .iter()
        .map(|e| read_blob(dir, e))
        .collect::<Result<Vec<_>>>()?;
    let shape = manifest.encoder.sample_shape();
    let (transforms, n_t) = match manifest.transforms {
        TransformManifest::Learned { k, mode } => {
            let spec = MaskSpec::for_shape(shape);
            let sigmoid = mode == Parametrization::Multiplicative;
            let per_mask = MaskNet::zeros(spec, sigmoid).params().len();
            if tensors.len() < k * per_mask {
                return Err(Error::Checkpoint("too few parameter blobs".into()));
            }
            let masks = tensors[..k * per_mask]
                .chunks(per_mask)
                .map(|c| MaskNet::from_params(spec, sigmoid, c.to_vec()))
                .collect::<Result<Vec<_>>>()?;
            (
                Transformations::Learned(TransformStack::from_masks(mode, masks)?),
                k * per_mask,
            )
        }
        TransformManifest::Fixed => (Transformations::Fixed(FixedTransforms), 0),
    };
    let encoder = EncoderNet::from_params(manifest.encoder, tensors[n_t..].to_vec())
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(Checkpoint {
        model: Model {
            transforms,
            encoder,
            temperature: manifest.temperature,
        },
        dataset: manifest.dataset,
        seed: manifest.seed,
        standardization: manifest.standardization,
        protocol: manifest.protocol,
    })
}
