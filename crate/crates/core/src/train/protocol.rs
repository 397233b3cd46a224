use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auc, f1_at_contamination, mean_std, score_all, totals, train, TrainConfig, TrainOutcome};
use crate::data::{split_dataset, standardize, DatasetSplit, LoadedDataset, Protocol, Standardization};
use crate::nn::{EncoderSpec, Parametrization};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolSpec {
    OneVsRest,
    NVsRest { n: usize },
    Tabular,
}

impl ProtocolSpec {
    /// The natural protocol for a dataset: one-vs-rest for series, the
    /// half-normal split for tables.
    pub fn default_for(ds: &LoadedDataset) -> Self {
        match ds {
            LoadedDataset::Series(_) => ProtocolSpec::OneVsRest,
            LoadedDataset::Table(_) => ProtocolSpec::Tabular,
        }
    }
}

/// One `(class set, seed)` training and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubRun {
    pub normal_classes: Vec<usize>,
    pub seed: u64,
    pub auc: Option<f64>,
    pub f1: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub test_scores: Vec<f64>,
    pub test_labels: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
    pub per_seed: Vec<f64>,
}

impl MetricSummary {
    fn of(values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (mean, std) = mean_std(&values);
        Some(Self {
            mean,
            std,
            per_seed: values,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSetSummary {
    pub normal_classes: Vec<usize>,
    pub auc: Option<MetricSummary>,
    pub f1: Option<MetricSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub protocol: ProtocolSpec,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub class_sets: Vec<ClassSetSummary>,
    /// Mean over class sets, computed per seed, then summarized over seeds.
    pub macro_auc: Option<MetricSummary>,
    pub macro_f1: Option<MetricSummary>,
    pub runs: Vec<SubRun>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Result of [`run_split`]: the summary plus the trained model.
pub struct SplitRun {
    pub sub: SubRun,
    pub outcome: TrainOutcome,
    pub standardization: Option<Standardization>,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Trains on one split and evaluates on its test set.
pub fn run_split(config: &TrainConfig, dataset: &str, split: &DatasetSplit) -> Result<SplitRun> {
    let (split, standardization) = if config.standardize {
        let (s, st) = standardize(split);
        (s, Some(st))
    } else {
        (split.clone(), None)
    };
    let model = config.build_model(EncoderSpec::for_dataset(dataset, split.shape))?;
    let outcome = train(config, &split, model)?;
    let scores = totals(&score_all(&outcome.model, &split.test)?);
    let sub = SubRun {
        normal_classes: split.descriptor.normal_classes.clone(),
        seed: config.seed,
        auc: defined(auc(&scores, &split.test_labels))?,
        f1: defined(f1_at_contamination(&scores, &split.test_labels))?,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.history.len(),
        final_train_loss: outcome.history.last().map_or(f64::NAN, |h| h.train_loss),
        test_scores: scores,
        test_labels: split.test_labels.clone(),
    };
    Ok(SplitRun {
        sub,
        outcome,
        standardization,
    })
}

/// Normal-class sets enumerated by a protocol.
pub fn class_sets(ds: &LoadedDataset, spec: ProtocolSpec) -> Result<Vec<Vec<usize>>> {
    match (ds, spec) {
        (LoadedDataset::Series(d), ProtocolSpec::OneVsRest) => {
            Ok((0..d.n_classes()).map(|c| vec![c]).collect())
        }
        (LoadedDataset::Series(d), ProtocolSpec::NVsRest { n }) => (0..d.n_classes())
            .map(|s| crate::data::n_vs_rest_classes(d.n_classes(), s, n))
            .collect(),
        (LoadedDataset::Table(_), ProtocolSpec::Tabular) => Ok(vec![vec![0]]),
        (LoadedDataset::Table(d), _) => Err(Error::Config(format!(
            "{} is tabular; only the tabular protocol applies",
            d.name
        ))),
        (LoadedDataset::Series(d), ProtocolSpec::Tabular) => Err(Error::Config(format!(
            "{} is a time-series dataset; use one_vs_rest or n_vs_rest",
            d.name
        ))),
    }
}

fn make_split(ds: &LoadedDataset, spec: ProtocolSpec, classes: &[usize], seed: u64) -> Result<DatasetSplit> {
    let protocol = match spec {
        ProtocolSpec::OneVsRest => Protocol::OneVsRest { normal_class: classes[0] },
        ProtocolSpec::NVsRest { n } => Protocol::NVsRest { start_class: classes[0], n },
        ProtocolSpec::Tabular => Protocol::Tabular,
    };
    split_dataset(ds, protocol, seed)
}

/// Trains and evaluates every `(class set, seed)` pair, in parallel, and
/// aggregates the metrics.
pub fn run_protocol(
    ds: &LoadedDataset,
    spec: ProtocolSpec,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<RunReport> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    config.validate(ds.shape())?;
    let sets = class_sets(ds, spec)?;
    let tasks: Vec<(usize, u64)> = (0..sets.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let runs = tasks
        .par_iter()
        .map(|&(c, seed)| {
            let split = make_split(ds, spec, &sets[c], seed)?;
            let cfg = TrainConfig {
                seed,
                ..config.clone()
            };
            Ok(run_split(&cfg, ds.name(), &split)?.sub)
        })
        .collect::<Result<Vec<SubRun>>>()?;

    Ok(RunReport::from_runs(ds.name(), spec, config, seeds, sets, runs))
}

impl RunReport {
    /// Aggregates sub-runs: per class set over seeds, and the macro mean
    /// over class sets computed per seed, then summarized over seeds.
    pub fn from_runs(
        dataset: &str,
        protocol: ProtocolSpec,
        config: &TrainConfig,
        seeds: &[u64],
        sets: Vec<Vec<usize>>,
        runs: Vec<SubRun>,
    ) -> Self {
        let metric = |keep: &dyn Fn(&SubRun) -> bool, f: fn(&SubRun) -> Option<f64>| -> Option<Vec<f64>> {
            runs.iter().filter(|r| keep(r)).map(f).collect()
        };
        let class_sets = sets
            .iter()
            .map(|set| {
                let keep = |r: &SubRun| &r.normal_classes == set;
                ClassSetSummary {
                    normal_classes: set.clone(),
                    auc: metric(&keep, |r| r.auc).and_then(MetricSummary::of),
                    f1: metric(&keep, |r| r.f1).and_then(MetricSummary::of),
                }
            })
            .collect();
        let macro_over = |f: fn(&SubRun) -> Option<f64>| -> Option<MetricSummary> {
            let per_seed: Option<Vec<f64>> = seeds
                .iter()
                .map(|&s| metric(&|r: &SubRun| r.seed == s, f).map(|v| mean_std(&v).0))
                .collect();
            per_seed.and_then(MetricSummary::of)
        };
        RunReport {
            dataset: dataset.to_string(),
            protocol,
            config: config.clone(),
            seeds: seeds.to_vec(),
            class_sets,
            macro_auc: macro_over(|r| r.auc),
            macro_f1: macro_over(|r| r.f1),
            runs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub k: usize,
    pub mode: Parametrization,
    pub metric: MetricSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub dataset: String,
    /// `auc` for series, `f1` for tables.
    pub metric: String,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let n_seeds = self.cells.first().map_or(0, |c| c.metric.per_seed.len());
        let mut header = vec!["k".to_string(), "mode".into(), format!("{}_mean", self.metric), format!("{}_std", self.metric)];
        header.extend((0..n_seeds).map(|i| format!("seed{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for c in &self.cells {
            let mut row = vec![
                c.k.to_string(),
                c.mode.name().to_string(),
                c.metric.mean.to_string(),
                c.metric.std.to_string(),
            ];
            row.extend(c.metric.per_seed.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Macro metric for every `(K, mode)` cell.
pub fn k_sweep(
    ds: &LoadedDataset,
    spec: ProtocolSpec,
    ks: &[usize],
    modes: &[Parametrization],
    seeds: &[u64],
    config: &TrainConfig,
) -> Result<SweepTable> {
    if let Some(&bad) = ks.iter().find(|&&k| k < 2) {
        return Err(Error::Config(format!("K = {bad} in sweep; K >= 2 required")));
    }
    let tabular = matches!(ds, LoadedDataset::Table(_));
    let mut cells = Vec::with_capacity(ks.len() * modes.len());
    for &k in ks {
        for &mode in modes {
            let cfg = TrainConfig {
                k: Some(k),
                mode,
                ..config.clone()
            };
            let report = run_protocol(ds, spec, &cfg, seeds)?;
            let metric = if tabular { report.macro_f1 } else { report.macro_auc }.ok_or_else(|| {
                Error::UndefinedMetric(format!("no metric for K = {k}, mode {mode}"))
            })?;
            cells.push(SweepCell { k, mode, metric });
        }
    }
    Ok(SweepTable {
        dataset: ds.name().to_string(),
        metric: if tabular { "f1" } else { "auc" }.into(),
        cells,
    })
}
