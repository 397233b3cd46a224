mod common;

use neutral_core::data::Standardization;
use neutral_core::model::Model;
use neutral_core::nn::{EncoderSpec, Parametrization, SampleShape};
use neutral_core::train::checkpoint::{load, save, Checkpoint};
use neutral_core::train::{score_all, totals};
use neutral_core::Error;
use neutral_tensor::Tensor;

fn round_trip(model: Model, standardization: Option<Standardization>) {
    let dir = tempfile::tempdir().unwrap();
    let shape = model.sample_shape();
    let xs: Vec<Tensor> = (0..8).map(|i| common::random_tensor(&shape.dims(), 1, i)).collect();
    let ckpt = Checkpoint { model, dataset: "toy".into(), seed: 9, standardization, protocol: None };
    save(&ckpt, dir.path()).unwrap();
    let back = load(dir.path()).unwrap();
    assert_eq!(back.dataset, "toy");
    assert_eq!(back.seed, 9);
    assert_eq!(back.standardization, ckpt.standardization);
    assert_eq!(back.model.param_names(), ckpt.model.param_names());
    let before = totals(&score_all(&ckpt.model, &ckpt.prepare(&xs)).unwrap());
    let after = totals(&score_all(&back.model, &back.prepare(&xs)).unwrap());
    for (a, b) in before.iter().zip(&after) {
        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn learned_models_round_trip() {
    let series = SampleShape::Series { channels: 3, length: 12 };
    for mode in Parametrization::ALL {
        round_trip(Model::dcl(EncoderSpec::for_dataset("toy", series), 4, mode, 0.1, 2).unwrap(), None);
    }
    let table = SampleShape::Table { features: 6 };
    let xs: Vec<Tensor> = (0..5).map(|i| common::random_tensor(&[6], 3, i)).collect();
    let stats = Standardization::fit(table, &xs);
    round_trip(Model::dcl(EncoderSpec::for_dataset("thyroid", table), 11, Parametrization::Residual, 0.1, 0).unwrap(), Some(stats));
}

#[test]
fn fixed_transformation_model_round_trips() {
    let series = SampleShape::Series { channels: 2, length: 16 };
    round_trip(Model::tp_fixed(EncoderSpec::for_dataset("toy", series), 1).unwrap(), None);
}

#[test]
fn refuses_other_format_versions() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model::dcl(EncoderSpec::dense(3, 4), 2, Parametrization::Residual, 0.1, 0).unwrap();
    save(&Checkpoint { model, dataset: "t".into(), seed: 0, standardization: None, protocol: None }, dir.path()).unwrap();
    let path = dir.path().join("manifest.json");
    let text = std::fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
    std::fs::write(&path, text).unwrap();
    assert!(matches!(load(dir.path()), Err(Error::Checkpoint(_))));
}

#[test]
fn truncated_blob_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model::dcl(EncoderSpec::dense(3, 4), 2, Parametrization::Residual, 0.1, 0).unwrap();
    save(&Checkpoint { model, dataset: "t".into(), seed: 0, standardization: None, protocol: None }, dir.path()).unwrap();
    let blob = dir.path().join("params/encoder.fc0.f32");
    let bytes = std::fs::read(&blob).unwrap();
    std::fs::write(&blob, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(load(dir.path()), Err(Error::Checkpoint(_))));
}
