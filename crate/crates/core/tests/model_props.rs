mod common;

use common::random_tensor;
use neutral_core::losses::{dcl_loss, ScoreBreakdown};
use neutral_core::model::{Model, Transformations};
use neutral_core::nn::{bind, EncoderNet, EncoderSpec, Parametrization, SampleShape, TransformStack};
use neutral_tensor::{Tape, Tensor};
use proptest::prelude::*;

fn residual_at_zero(spec: EncoderSpec, k: usize) -> Model {
    let shape = spec.sample_shape();
    Model {
        transforms: Transformations::Learned(TransformStack::zeros(shape, k, Parametrization::Residual).unwrap()),
        encoder: EncoderNet::init(spec, 4),
        temperature: 0.1,
    }
}

fn samples(shape: SampleShape, n: usize, seed: u64) -> Vec<Tensor> {
    (0..n).map(|i| random_tensor(&shape.dims(), seed, i as u64)).collect()
}

fn batch_scores(model: &Model, xs: &[Tensor]) -> Vec<ScoreBreakdown> {
    model.score_batch(&Tensor::stack(xs).unwrap()).unwrap()
}

#[test]
fn untrained_residual_model_scores_k_log_k() {
    let series = SampleShape::Series { channels: 3, length: 24 };
    let cases = [
        (EncoderSpec::for_dataset("synthetic", SampleShape::Table { features: 2 }), 11),
        (EncoderSpec::for_dataset("thyroid", SampleShape::Table { features: 6 }), 2),
        (EncoderSpec::for_dataset("toy", series), 12),
    ];
    for (spec, k) in cases {
        let shape = spec.sample_shape();
        let model = residual_at_zero(spec, k);
        let want = k as f64 * (k as f64).ln();
        for s in batch_scores(&model, &samples(shape, 20, 1)) {
            assert!((s.total - want).abs() < 1e-9, "{} vs {want}", s.total);
        }
    }
}

#[test]
fn batch_scores_match_single_scores() {
    let spec = EncoderSpec::for_dataset("toy", SampleShape::Series { channels: 2, length: 16 });
    let model = Model::dcl(spec, 4, Parametrization::Multiplicative, 0.1, 3).unwrap();
    let xs = samples(model.sample_shape(), 150, 2);
    let batch = batch_scores(&model, &xs);
    for (x, b) in xs.iter().zip(&batch) {
        let one = model.anomaly_score(x).unwrap();
        assert!((one.total - b.total).abs() < 1e-12);
    }
}

#[test]
fn score_is_the_singleton_loss() {
    let spec = EncoderSpec::for_dataset("arrhythmia", SampleShape::Table { features: 9 });
    let model = Model::dcl(spec, 5, Parametrization::FeedForward, 0.2, 0).unwrap();
    let x = random_tensor(&[9], 5, 0);
    let tape = Tape::new();
    let vars = bind(&tape, &model.params(), false);
    let loss = model.loss(&tape, &vars, &Tensor::stack(std::slice::from_ref(&x)).unwrap()).unwrap();
    let s = model.anomaly_score(&x).unwrap();
    assert!((loss.value().item().unwrap() - s.total).abs() < 1e-12);
    let z = model.embeddings(&x).unwrap();
    let direct = dcl_loss(tape.constant(z.reshape(&[1, 6, z.shape()[1]]).unwrap()), 0.2).unwrap();
    assert!((direct.value().item().unwrap() - s.total).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scoring_is_permutation_equivariant(seed in 0u64..1000, rot in 1usize..9) {
        let spec = EncoderSpec::for_dataset("thyroid", SampleShape::Table { features: 6 });
        let model = Model::dcl(spec, 3, Parametrization::Residual, 0.1, seed).unwrap();
        let xs = samples(model.sample_shape(), 10, seed);
        let mut rotated = xs.clone();
        rotated.rotate_left(rot);
        let a = batch_scores(&model, &xs);
        let b = batch_scores(&model, &rotated);
        for i in 0..10 {
            prop_assert_eq!(a[(i + rot) % 10].total, b[i].total);
        }
    }

    #[test]
    fn breakdown_terms_sum_to_nonnegative_total(seed in 0u64..1000, k in 2usize..7) {
        let spec = EncoderSpec::for_dataset("toy", SampleShape::Table { features: 4 });
        let model = Model::dcl(spec, k, Parametrization::Residual, 0.1, seed).unwrap();
        for s in batch_scores(&model, &samples(model.sample_shape(), 6, seed)) {
            prop_assert_eq!(s.per_transformation.len(), k);
            prop_assert!((s.per_transformation.iter().sum::<f64>() - s.total).abs() < 1e-6);
            prop_assert!(s.total >= 0.0);
            let shares: f64 = s.shares().iter().sum();
            prop_assert!((shares - 1.0).abs() < 1e-9);
        }
    }
}
