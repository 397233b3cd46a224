use neutral_tensor::{rng_stream, standard_normal, Tensor};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{LoadedDataset, TabularDataset, TimeSeriesDataset};
use crate::nn::SampleShape;
use crate::{Error, Result};

const VALIDATION_FRACTION: f64 = 0.1;
const STD_FLOOR: f64 = 1e-8;
const SPLIT_STREAM: u64 = 0x5350;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Protocol {
    OneVsRest { normal_class: usize },
    NVsRest { start_class: usize, n: usize },
    Tabular,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolDescriptor {
    pub protocol: Protocol,
    pub normal_classes: Vec<usize>,
    pub seed: u64,
}

/// Train inliers, and labeled validation and test sets (`true` = anomaly).
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub shape: SampleShape,
    pub train: Vec<Tensor>,
    pub validation: Vec<Tensor>,
    pub validation_labels: Vec<bool>,
    pub test: Vec<Tensor>,
    pub test_labels: Vec<bool>,
    pub descriptor: ProtocolDescriptor,
}

impl DatasetSplit {
    /// Builds a split from an inlier training set and a labeled pool, of
    /// which a stratified tenth becomes validation.
    pub fn from_pool(
        shape: SampleShape,
        train: Vec<Tensor>,
        pool: Vec<Tensor>,
        pool_labels: Vec<bool>,
        descriptor: ProtocolDescriptor,
    ) -> Result<Self> {
        let (val_idx, test_idx) = stratified_holdout(&pool_labels, descriptor.seed);
        let pick = |idx: &[usize]| -> (Vec<Tensor>, Vec<bool>) {
            idx.iter().map(|&i| (pool[i].clone(), pool_labels[i])).unzip()
        };
        let (validation, validation_labels) = pick(&val_idx);
        let (test, test_labels) = pick(&test_idx);
        let split = Self {
            shape,
            train,
            validation,
            validation_labels,
            test,
            test_labels,
            descriptor,
        };
        if split.train.is_empty() {
            return Err(Error::Config("protocol leaves no training inliers".into()));
        }
        Ok(split)
    }
}

/// The split a protocol produces on a loaded dataset.
pub fn split_dataset(ds: &LoadedDataset, protocol: Protocol, seed: u64) -> Result<DatasetSplit> {
    match (ds, protocol) {
        (LoadedDataset::Series(d), Protocol::OneVsRest { normal_class }) => {
            split_one_vs_rest(d, normal_class, seed)
        }
        (LoadedDataset::Series(d), Protocol::NVsRest { start_class, n }) => {
            split_n_vs_rest(d, start_class, n, seed)
        }
        (LoadedDataset::Table(d), Protocol::Tabular) => split_tabular(d, seed),
        (LoadedDataset::Table(d), _) => Err(Error::Config(format!(
            "{} is tabular; only the tabular protocol applies",
            d.name
        ))),
        (LoadedDataset::Series(d), Protocol::Tabular) => Err(Error::Config(format!(
            "{} is a time-series dataset; use one_vs_rest or n_vs_rest",
            d.name
        ))),
    }
}

/// Seeded stratified draw of `round(0.1·N)` pool indices. Returns
/// `(validation, test)`, both in ascending order.
fn stratified_holdout(labels: &[bool], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n = labels.len();
    let n_val = (VALIDATION_FRACTION * n as f64).round() as usize;
    let mut anomalies: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    let mut normals: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
    let mut a_val = (n_val as f64 * anomalies.len() as f64 / n.max(1) as f64).round() as usize;
    // keep both classes in validation whenever possible
    if n_val >= 2 && !anomalies.is_empty() && !normals.is_empty() {
        a_val = a_val.clamp(1, n_val - 1);
    }
    let a_val = a_val.min(anomalies.len());
    let n_norm = (n_val - a_val).min(normals.len());
    let mut rng = rng_stream(seed, SPLIT_STREAM);
    anomalies.shuffle(&mut rng);
    normals.shuffle(&mut rng);
    let mut val: Vec<usize> = anomalies[..a_val].iter().chain(&normals[..n_norm]).copied().collect();
    val.sort_unstable();
    let mut in_val = vec![false; n];
    val.iter().for_each(|&i| in_val[i] = true);
    let test = (0..n).filter(|&i| !in_val[i]).collect();
    (val, test)
}

fn class_set_split(
    ds: &TimeSeriesDataset,
    normal: &[usize],
    protocol: Protocol,
    seed: u64,
) -> Result<DatasetSplit> {
    let train = ds
        .train
        .iter()
        .zip(&ds.train_labels)
        .filter(|(_, y)| normal.contains(y))
        .map(|(x, _)| x.clone())
        .collect();
    let labels = ds.test_labels.iter().map(|y| !normal.contains(y)).collect();
    DatasetSplit::from_pool(
        ds.shape(),
        train,
        ds.test.clone(),
        labels,
        ProtocolDescriptor {
            protocol,
            normal_classes: normal.to_vec(),
            seed,
        },
    )
}

/// One class normal, everything else anomalous; uses the archive's own
/// train/test partitions.
pub fn split_one_vs_rest(ds: &TimeSeriesDataset, normal_class: usize, seed: u64) -> Result<DatasetSplit> {
    if !ds.train_labels.contains(&normal_class) {
        return Err(Error::Config(format!(
            "class {normal_class} has no training samples in {}",
            ds.name
        )));
    }
    class_set_split(ds, &[normal_class], Protocol::OneVsRest { normal_class }, seed)
}

/// `n` cyclically consecutive classes starting at `start_class`.
pub fn n_vs_rest_classes(n_classes: usize, start_class: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || n >= n_classes {
        return Err(Error::Config(format!(
            "n-vs-rest needs 1 <= n < N, got n = {n} with N = {n_classes}"
        )));
    }
    if start_class >= n_classes {
        return Err(Error::Config(format!(
            "start class {start_class} out of range for {n_classes} classes"
        )));
    }
    Ok((0..n).map(|i| (start_class + i) % n_classes).collect())
}

pub fn split_n_vs_rest(ds: &TimeSeriesDataset, start_class: usize, n: usize, seed: u64) -> Result<DatasetSplit> {
    let normal = n_vs_rest_classes(ds.n_classes(), start_class, n)?;
    class_set_split(ds, &normal, Protocol::NVsRest { start_class, n }, seed)
}

/// Half of the normal rows train; the other half plus every anomaly form
/// the pool.
pub fn split_tabular(ds: &TabularDataset, seed: u64) -> Result<DatasetSplit> {
    let mut normals: Vec<usize> = (0..ds.rows.len()).filter(|&i| !ds.anomalous[i]).collect();
    let mut rng = rng_stream(seed, SPLIT_STREAM + 1);
    normals.shuffle(&mut rng);
    let n_train = normals.len() / 2;
    let mut in_train = vec![false; ds.rows.len()];
    normals[..n_train].iter().for_each(|&i| in_train[i] = true);
    let train = (0..ds.rows.len())
        .filter(|&i| in_train[i])
        .map(|i| ds.rows[i].clone())
        .collect();
    let pool_idx: Vec<usize> = (0..ds.rows.len()).filter(|&i| !in_train[i]).collect();
    DatasetSplit::from_pool(
        ds.shape(),
        train,
        pool_idx.iter().map(|&i| ds.rows[i].clone()).collect(),
        pool_idx.iter().map(|&i| ds.anomalous[i]).collect(),
        ProtocolDescriptor {
            protocol: Protocol::Tabular,
            normal_classes: vec![0],
            seed,
        },
    )
}

/// Per-feature (tabular) or per-channel (series) statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Fits on `samples`, all of `shape`.
    pub fn fit(shape: SampleShape, samples: &[Tensor]) -> Self {
        let (groups, run) = match shape {
            SampleShape::Series { channels, length } => (channels, length),
            SampleShape::Table { features } => (features, 1),
        };
        let mut sum = vec![0.0; groups];
        let mut count = 0.0;
        for s in samples {
            for (g, chunk) in s.data().chunks(run).enumerate() {
                sum[g] += chunk.iter().sum::<f64>();
            }
            count += run as f64;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count.max(1.0)).collect();
        let mut sq = vec![0.0; groups];
        for s in samples {
            for (g, chunk) in s.data().chunks(run).enumerate() {
                sq[g] += chunk.iter().map(|v| (v - mean[g]).powi(2)).sum::<f64>();
            }
        }
        let std = sq
            .iter()
            .map(|s| (s / count.max(1.0)).sqrt().max(STD_FLOOR))
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &Tensor) -> Tensor {
        let groups = self.mean.len();
        let run = x.numel() / groups;
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let g = i / run;
                (v - self.mean[g]) / self.std[g]
            })
            .collect();
        Tensor::new(x.shape().to_vec(), data).expect("same shape")
    }
}

/// Standardizes every partition with statistics from the training set.
pub fn standardize(split: &DatasetSplit) -> (DatasetSplit, Standardization) {
    let stats = Standardization::fit(split.shape, &split.train);
    let map = |xs: &[Tensor]| xs.iter().map(|x| stats.apply(x)).collect();
    let out = DatasetSplit {
        train: map(&split.train),
        validation: map(&split.validation),
        test: map(&split.test),
        ..split.clone()
    };
    (out, stats)
}

/// Two isotropic Gaussians in the plane: inliers around `inlier_mean`,
/// anomalies around `anomaly_mean`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoGaussians {
    pub inlier_mean: [f64; 2],
    pub anomaly_mean: [f64; 2],
    pub std: f64,
    pub n_train: usize,
    pub n_test_inliers: usize,
    pub n_anomalies: usize,
}

impl Default for TwoGaussians {
    fn default() -> Self {
        Self {
            inlier_mean: [5.0, 5.0],
            anomaly_mean: [-5.0, 5.0],
            std: 0.5,
            n_train: 200,
            n_test_inliers: 100,
            n_anomalies: 100,
        }
    }
}

impl TwoGaussians {
    /// All samples as one labeled table (`n_train + n_test_inliers`
    /// inliers first, then the anomalies), for the tabular protocol.
    pub fn dataset(&self, seed: u64) -> Result<TabularDataset> {
        let s = self.split(seed)?;
        let mut rows: Vec<Vec<f64>> = s.train.iter().map(Tensor::to_vec).collect();
        let mut labels = vec![false; rows.len()];
        let mut pool: Vec<(Vec<f64>, bool)> = s
            .validation
            .iter()
            .zip(&s.validation_labels)
            .chain(s.test.iter().zip(&s.test_labels))
            .map(|(x, &l)| (x.to_vec(), l))
            .collect();
        pool.sort_by_key(|(_, l)| *l);
        for (r, l) in pool {
            rows.push(r);
            labels.push(l);
        }
        TabularDataset::new("synthetic", rows, labels)
    }

    /// A seeded split. The data are left unstandardized: the bias-free
    /// networks only see directions, so the clusters are placed at
    /// different angles from the origin.
    pub fn split(&self, seed: u64) -> Result<DatasetSplit> {
        let mut rng = rng_stream(seed, 0x5947);
        let mut draw = |m: [f64; 2], n: usize| -> Vec<Tensor> {
            (0..n)
                .map(|_| {
                    let x = m[0] + self.std * standard_normal(&mut rng);
                    let y = m[1] + self.std * standard_normal(&mut rng);
                    Tensor::vector(&[x, y])
                })
                .collect()
        };
        let train = draw(self.inlier_mean, self.n_train);
        let mut pool = draw(self.inlier_mean, self.n_test_inliers);
        pool.extend(draw(self.anomaly_mean, self.n_anomalies));
        let mut labels = vec![false; self.n_test_inliers];
        labels.extend(vec![true; self.n_anomalies]);
        DatasetSplit::from_pool(
            SampleShape::Table { features: 2 },
            train,
            pool,
            labels,
            ProtocolDescriptor {
                protocol: Protocol::Tabular,
                normal_classes: vec![0],
                seed,
            },
        )
    }
}
