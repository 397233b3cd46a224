#![allow(dead_code)]

use neutral_core::data::TimeSeriesDataset;
use neutral_tensor::{rng_stream, standard_normal, Tensor};

/// Class `c` is a sinusoid of frequency `c + 1` on every channel plus noise.
pub fn toy_series(n_classes: usize, per_class: usize, channels: usize, length: usize, seed: u64) -> TimeSeriesDataset {
    let mut rng = rng_stream(seed, 77);
    let mut draw = |c: usize| {
        let data = (0..channels * length)
            .map(|i| {
                let t = (i % length) as f64 / length as f64;
                (std::f64::consts::TAU * (c + 1) as f64 * t).sin() + 0.1 * standard_normal(&mut rng)
            })
            .collect();
        Tensor::new(vec![channels, length], data).unwrap()
    };
    let mut ds = TimeSeriesDataset {
        name: "toy".into(),
        channels,
        length,
        class_names: (0..n_classes).map(|c| format!("c{c}")).collect(),
        train: vec![],
        train_labels: vec![],
        test: vec![],
        test_labels: vec![],
    };
    for c in 0..n_classes {
        for _ in 0..per_class {
            ds.train.push(draw(c));
            ds.train_labels.push(c);
            ds.test.push(draw(c));
            ds.test_labels.push(c);
        }
    }
    ds
}

pub fn random_tensor(shape: &[usize], seed: u64, stream: u64) -> Tensor {
    let mut rng = rng_stream(seed, stream);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| standard_normal(&mut rng)).collect()).unwrap()
}
