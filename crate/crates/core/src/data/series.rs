use std::path::Path;

use neutral_tensor::Tensor;

use super::ts::{parse_ts, write_ts, TsCase, TsFile};
use crate::nn::SampleShape;
use crate::{Error, Result};

/// How native sequence lengths are brought to one fixed length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LengthRule {
    /// Keep cases with `min ≤ len ≤ max`, then zero-pad at the end to `max`.
    FilterPad { min: usize, max: usize },
    /// Cut to `len`; shorter cases are zero-padded.
    Truncate { len: usize },
    /// Every case must already have this length.
    Exact { len: usize },
    /// All cases must share one length, whatever it is.
    Uniform,
}

/// Preprocessing for the archive datasets: expected channel count and
/// length rule.
pub fn dataset_rule(name: &str) -> (Option<usize>, LengthRule) {
    match name.to_ascii_lowercase().as_str() {
        "sad" | "spokenarabicdigits" => (Some(13), LengthRule::FilterPad { min: 20, max: 50 }),
        "ct" | "charactertrajectories" => (Some(3), LengthRule::Truncate { len: 182 }),
        "epilepsy" => (Some(3), LengthRule::Truncate { len: 203 }),
        "natops" => (Some(24), LengthRule::Exact { len: 51 }),
        "rs" | "racketsports" => (Some(6), LengthRule::Exact { len: 30 }),
        _ => (None, LengthRule::Uniform),
    }
}

/// A labeled multivariate time-series dataset with the archive's train and
/// test partitions, all cases `C × L`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    pub name: String,
    pub channels: usize,
    pub length: usize,
    pub class_names: Vec<String>,
    pub train: Vec<Tensor>,
    pub train_labels: Vec<usize>,
    pub test: Vec<Tensor>,
    pub test_labels: Vec<usize>,
}

impl TimeSeriesDataset {
    pub fn shape(&self) -> SampleShape {
        SampleShape::Series {
            channels: self.channels,
            length: self.length,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Loads the two partitions of an archive dataset and applies its
    /// preprocessing.
    pub fn load(name: &str, train: &Path, test: &Path) -> Result<Self> {
        let tr = read(train)?;
        let te = read(test)?;
        Self::from_files(name, &tr, &te)
    }

    pub fn from_files(name: &str, train: &TsFile, test: &TsFile) -> Result<Self> {
        let class_names = train
            .class_labels
            .clone()
            .ok_or_else(|| Error::Config(format!("{name}: train file has no class labels")))?;
        if test.class_labels.as_ref() != Some(&class_names) {
            return Err(Error::Config(format!(
                "{name}: train and test files declare different class labels"
            )));
        }
        let (want_channels, rule) = dataset_rule(name);
        let train_cases = apply_rule(name, &train.cases, rule)?;
        let test_cases = apply_rule(name, &test.cases, rule)?;
        let first = train_cases
            .first()
            .or(test_cases.first())
            .ok_or_else(|| Error::Config(format!("{name}: no cases left after preprocessing")))?;
        let channels = first.dims.len();
        let length = first.length();
        if let Some(c) = want_channels {
            if c != channels {
                return Err(Error::Config(format!(
                    "{name}: expected {c} channels, file has {channels}"
                )));
            }
        }
        let convert = |cases: &[TsCase]| -> Result<(Vec<Tensor>, Vec<usize>)> {
            let mut xs = Vec::with_capacity(cases.len());
            let mut ys = Vec::with_capacity(cases.len());
            for case in cases {
                if case.length() != length || case.dims.len() != channels {
                    return Err(Error::Config(format!(
                        "{name}: cases differ in shape ({}×{} vs {channels}×{length})",
                        case.dims.len(),
                        case.length()
                    )));
                }
                let label = case.label.as_deref().expect("labeled file");
                ys.push(class_names.iter().position(|c| c == label).expect("declared"));
                xs.push(Tensor::new(vec![channels, length], case.dims.concat())?);
            }
            Ok((xs, ys))
        };
        let (train, train_labels) = convert(&train_cases)?;
        let (test, test_labels) = convert(&test_cases)?;
        Ok(Self {
            name: name.to_string(),
            channels,
            length,
            class_names,
            train,
            train_labels,
            test,
            test_labels,
        })
    }

    /// The two partitions as `.ts` files.
    pub fn to_files(&self) -> (TsFile, TsFile) {
        let file = |xs: &[Tensor], ys: &[usize]| TsFile {
            problem_name: self.name.clone(),
            headers: vec![
                "univariate false".into(),
                "equalLength true".into(),
                format!("seriesLength {}", self.length),
            ],
            class_labels: Some(self.class_names.clone()),
            cases: xs
                .iter()
                .zip(ys)
                .map(|(x, &y)| TsCase {
                    dims: x.data().chunks(self.length).map(<[f64]>::to_vec).collect(),
                    label: Some(self.class_names[y].clone()),
                })
                .collect(),
        };
        (file(&self.train, &self.train_labels), file(&self.test, &self.test_labels))
    }

    pub fn write(&self, train: &Path, test: &Path) -> Result<()> {
        let (a, b) = self.to_files();
        std::fs::write(train, write_ts(&a))?;
        std::fs::write(test, write_ts(&b))?;
        Ok(())
    }
}

/// Reads and parses one `.ts` file.
pub fn load_uea_ts(path: &Path) -> Result<TsFile> {
    read(path)
}

fn read(path: &Path) -> Result<TsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    parse_ts(&text)
}

fn fit(dims: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
    dims.iter()
        .map(|d| {
            let mut v: Vec<f64> = d.iter().copied().take(len).collect();
            v.resize(len, 0.0);
            v
        })
        .collect()
}

/// Applies a length rule to parsed cases.
pub fn apply_rule(name: &str, cases: &[TsCase], rule: LengthRule) -> Result<Vec<TsCase>> {
    let mut out = Vec::with_capacity(cases.len());
    for case in cases {
        let len = case.length();
        let dims = match rule {
            LengthRule::FilterPad { min, max } => {
                if len < min || len > max {
                    continue;
                }
                fit(&case.dims, max)
            }
            LengthRule::Truncate { len: target } => fit(&case.dims, target),
            LengthRule::Exact { len: target } => {
                if len != target {
                    return Err(Error::Config(format!(
                        "{name}: expected series length {target}, found {len}"
                    )));
                }
                case.dims.clone()
            }
            LengthRule::Uniform => case.dims.clone(),
        };
        out.push(TsCase {
            dims,
            label: case.label.clone(),
        });
    }
    if rule == LengthRule::Uniform {
        if let Some(first) = out.first() {
            let len = first.length();
            if let Some(bad) = out.iter().find(|c| c.length() != len) {
                return Err(Error::Config(format!(
                    "{name}: unequal series lengths ({len} and {}) and no length rule",
                    bad.length()
                )));
            }
        }
    }
    Ok(out)
}
