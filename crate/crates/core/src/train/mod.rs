//! Training loop, evaluation metrics, protocol drivers and checkpoints.

pub mod checkpoint;
mod metrics;
mod protocol;

pub(crate) use protocol::csv_err;

pub use metrics::{auc, f1_at_contamination, mean_std};
pub use protocol::{
    class_sets, k_sweep, run_protocol, run_split, ClassSetSummary, MetricSummary, ProtocolSpec, RunReport,
    SplitRun, SubRun, SweepCell, SweepTable,
};

use neutral_tensor::{rng_stream, AdamConfig, AdamState, Tape, Tensor};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::losses::{ScoreBreakdown, DEFAULT_TEMPERATURE};
use crate::model::{gather_samples, Model, Objective};
use crate::nn::{bind, EncoderSpec, Parametrization, SampleShape};
use crate::{Error, Result};

const SHUFFLE_STREAM: u64 = 0x5348;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    /// `None` picks 12 for series and 11 for tables.
    pub k: Option<usize>,
    pub mode: Parametrization,
    pub seed: u64,
    /// Epochs without a validation improvement before stopping; 0 disables
    /// early stopping.
    pub patience: usize,
    pub objective: Objective,
    /// Standardize with training statistics before fitting.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-4,
            temperature: DEFAULT_TEMPERATURE,
            k: None,
            mode: Parametrization::Residual,
            seed: 0,
            patience: 20,
            objective: Objective::Dcl,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn k_for(&self, shape: SampleShape) -> usize {
        self.k.unwrap_or(match shape {
            SampleShape::Series { .. } => 12,
            SampleShape::Table { .. } => 11,
        })
    }

    pub fn validate(&self, shape: SampleShape) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        match self.objective {
            Objective::Dcl => {
                crate::losses::DclConfig::new(self.temperature, self.k_for(shape))?;
            }
            Objective::TpFixed => {
                if !matches!(shape, SampleShape::Series { .. }) {
                    return Err(Error::Config(
                        "objective tp_fixed is only valid for time series".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// A fresh model for this configuration.
    pub fn build_model(&self, encoder: EncoderSpec) -> Result<Model> {
        let shape = encoder.sample_shape();
        self.validate(shape)?;
        match self.objective {
            Objective::Dcl => Model::dcl(
                encoder,
                self.k_for(shape),
                self.mode,
                self.temperature,
                self.seed,
            ),
            Objective::TpFixed => Model::tp_fixed(encoder, self.seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_auc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AUC (the last
    /// epoch when validation cannot rank).
    pub model: Model,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
}

/// Validation AUC if the validation set holds both classes.
fn validation_auc(model: &Model, split: &DatasetSplit) -> Result<Option<f64>> {
    let labels = &split.validation_labels;
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Ok(None);
    }
    let scores = score_all(model, &split.validation)?;
    Ok(Some(auc(&totals(&scores), labels)?))
}

/// Jointly optimizes transformations and encoder on `split.train`, keeping
/// the parameters with the best validation AUC. Test labels are never read.
pub fn train(config: &TrainConfig, split: &DatasetSplit, model: Model) -> Result<TrainOutcome> {
    config.validate(split.shape)?;
    if split.train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut model = model;
    let mut params = model.params();
    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
        &params,
    );
    let mut rng = rng_stream(config.seed, SHUFFLE_STREAM);
    let n = split.train.len();
    let batch = config.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for idx in order.chunks(batch) {
            let x = gather_samples(&split.train, idx)?;
            let tape = Tape::new();
            let vars = bind(&tape, &params, true);
            let loss = model.loss(&tape, &vars, &x)?;
            let value = loss.value().item()?;
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    msg: format!("loss became {value}"),
                });
            }
            let grads = tape.backward(loss)?;
            let g: Vec<Tensor> = vars.iter().map(|v| grads.wrt(*v)).collect();
            if g.iter().any(|t| t.data().iter().any(|v| !v.is_finite())) {
                return Err(Error::Diverged {
                    epoch,
                    msg: "non-finite gradient".into(),
                });
            }
            adam.step(&mut params, &g)?;
            loss_sum += value;
            batches += 1;
        }
        model.set_params(&params)?;
        let val = validation_auc(&model, split)?;
        history.push(EpochLog {
            epoch,
            train_loss: loss_sum / batches as f64,
            validation_auc: val,
        });
        if let Some(v) = val {
            if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                best = Some((v, epoch, params.clone()));
            }
        }
        if config.patience > 0 {
            if let Some((_, best_epoch, _)) = &best {
                if epoch - best_epoch >= config.patience {
                    break;
                }
            }
        }
    }
    let best_epoch = match best {
        Some((_, epoch, p)) => {
            model.set_params(&p)?;
            epoch
        }
        None => history.len(),
    };
    Ok(TrainOutcome {
        model,
        best_epoch,
        history,
    })
}

/// Scores every sample independently.
pub fn score_all(model: &Model, samples: &[Tensor]) -> Result<Vec<ScoreBreakdown>> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let batch = Tensor::stack(samples)?;
    model.score_batch(&batch)
}

pub fn totals(scores: &[ScoreBreakdown]) -> Vec<f64> {
    scores.iter().map(|s| s.total).collect()
}
