use std::collections::BTreeSet;
use std::path::Path;

use neutral_tensor::{rng_stream, Tensor};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::SampleShape;
use crate::{Error, Result};

/// Raw UCI arrhythmia attributes dropped to reach 274 (1-based 11–15, the
/// vector angles, which carry the missing values).
const ARRHYTHMIA_DROPPED: std::ops::Range<usize> = 10..15;
const ARRHYTHMIA_ANOMALY_CLASSES: [u32; 8] = [3, 4, 5, 7, 8, 9, 14, 15];
/// Continuous columns of the raw thyroid (ann) format: age and the five
/// hormone measurements.
const THYROID_COLUMNS: [usize; 6] = [0, 16, 17, 18, 19, 20];
const KDD_CATEGORICAL: [usize; 7] = [1, 2, 3, 6, 11, 20, 21];
const KDD_FIELDS: usize = 41;
const KDD_REV_RATIO: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TabularKind {
    Arrhythmia,
    Thyroid,
    Kdd,
    KddRev,
    /// Numeric columns with a trailing 0/1 anomaly label.
    Csv,
}

impl TabularKind {
    pub fn name(&self) -> &'static str {
        match self {
            TabularKind::Arrhythmia => "arrhythmia",
            TabularKind::Thyroid => "thyroid",
            TabularKind::Kdd => "kdd",
            TabularKind::KddRev => "kddrev",
            TabularKind::Csv => "csv",
        }
    }
}

impl std::str::FromStr for TabularKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "arrhythmia" => Ok(TabularKind::Arrhythmia),
            "thyroid" => Ok(TabularKind::Thyroid),
            "kdd" | "kddcup" => Ok(TabularKind::Kdd),
            "kddrev" | "kddcuprev" => Ok(TabularKind::KddRev),
            "csv" => Ok(TabularKind::Csv),
            other => Err(Error::Config(format!("unknown tabular kind {other:?}"))),
        }
    }
}

/// Rows with binary labels (`true` = anomaly).
#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    pub name: String,
    pub rows: Vec<Tensor>,
    pub anomalous: Vec<bool>,
}

impl TabularDataset {
    pub fn new(name: &str, rows: Vec<Vec<f64>>, anomalous: Vec<bool>) -> Result<Self> {
        if rows.len() != anomalous.len() {
            return Err(Error::Config("row and label counts differ".into()));
        }
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config(format!("{name}: rows differ in width")));
        }
        let rows = rows
            .into_iter()
            .map(|r| Ok(Tensor::new(vec![d], r)?))
            .collect::<Result<_>>()?;
        Ok(Self {
            name: name.to_string(),
            rows,
            anomalous,
        })
    }

    pub fn features(&self) -> usize {
        self.rows.first().map_or(0, Tensor::numel)
    }

    pub fn shape(&self) -> SampleShape {
        SampleShape::Table {
            features: self.features(),
        }
    }

    pub fn n_anomalies(&self) -> usize {
        self.anomalous.iter().filter(|&&a| a).count()
    }
}

/// Data lines split into fields on commas or whitespace; `#`/`%` comment
/// lines and blank lines skipped. Yields `(line number, fields)`.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with('%') {
            return None;
        }
        let fields = if l.contains(',') {
            l.split(',').map(str::trim).collect()
        } else {
            l.split_whitespace().collect()
        };
        Some((i + 1, fields))
    })
}

fn number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid numeric value {tok:?}"),
    })
}

fn is_header(fields: &[&str]) -> bool {
    fields.iter().any(|f| f.parse::<f64>().is_err() && *f != "?")
}

fn binary_label(tok: &str, line: usize) -> Result<bool> {
    match number(tok, line)? {
        v if v == 0.0 => Ok(false),
        v if v == 1.0 => Ok(true),
        v => Err(Error::Parse {
            line,
            msg: format!("expected a 0/1 anomaly label, got {v}"),
        }),
    }
}

fn width_err(line: usize, got: usize, expected: &str) -> Error {
    Error::Parse {
        line,
        msg: format!("row has {got} fields, expected {expected}"),
    }
}

/// Loads a tabular dataset; `seed` drives the KDDRev subsampling.
pub fn load_tabular(path: &Path, kind: TabularKind, seed: u64) -> Result<TabularDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    parse_tabular(&text, kind, seed)
}

pub fn parse_tabular(text: &str, kind: TabularKind, seed: u64) -> Result<TabularDataset> {
    match kind {
        TabularKind::Arrhythmia => parse_arrhythmia(text),
        TabularKind::Thyroid => parse_thyroid(text),
        TabularKind::Csv => parse_labeled_csv(text, "csv", None),
        TabularKind::Kdd | TabularKind::KddRev => {
            let (rows, attack) = parse_kdd(text, None)?.into_rows();
            if kind == TabularKind::Kdd {
                // attacks form the normal class here
                let anomalous = attack.iter().map(|a| !a).collect();
                TabularDataset::new("kdd", rows, anomalous)
            } else {
                kdd_rev(rows, attack, seed)
            }
        }
    }
}

fn parse_labeled_csv(text: &str, name: &str, width: Option<usize>) -> Result<TabularDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (n, (line, fields)) in records(text).enumerate() {
        if n == 0 && is_header(&fields) {
            continue;
        }
        if let Some(w) = width {
            if fields.len() != w + 1 {
                return Err(width_err(line, fields.len(), &format!("{w} features + label")));
            }
        }
        let (label, feats) = fields.split_last().ok_or_else(|| width_err(line, 0, "a label"))?;
        labels.push(binary_label(label, line)?);
        rows.push(feats.iter().map(|t| number(t, line)).collect::<Result<Vec<_>>>()?);
    }
    TabularDataset::new(name, rows, labels)
}

/// Accepts either the prepared 274 features + 0/1 label, or the raw UCI
/// file (279 attributes + class 1–16).
fn parse_arrhythmia(text: &str) -> Result<TabularDataset> {
    let first = records(text).next().map_or(0, |(_, f)| f.len());
    if first == 275 {
        return parse_labeled_csv(text, "arrhythmia", Some(274));
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (line, fields) in records(text) {
        if fields.len() != 280 {
            return Err(width_err(line, fields.len(), "280 (raw) or 275 (prepared)"));
        }
        let class = number(fields[279], line)? as u32;
        let mut row = Vec::with_capacity(274);
        for (i, tok) in fields[..279].iter().enumerate() {
            if ARRHYTHMIA_DROPPED.contains(&i) {
                continue;
            }
            row.push(number(tok, line)?);
        }
        labels.push(ARRHYTHMIA_ANOMALY_CLASSES.contains(&class));
        rows.push(row);
    }
    TabularDataset::new("arrhythmia", rows, labels)
}

/// Accepts either the prepared 6 features + 0/1 label, or the raw ann
/// format (21 attributes + class, class 1 = hyperfunction).
fn parse_thyroid(text: &str) -> Result<TabularDataset> {
    let first = records(text).next().map_or(0, |(_, f)| f.len());
    if first == 7 {
        return parse_labeled_csv(text, "thyroid", Some(6));
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (line, fields) in records(text) {
        if fields.len() != 22 {
            return Err(width_err(line, fields.len(), "22 (raw) or 7 (prepared)"));
        }
        let class = number(fields[21], line)?;
        if ![1.0, 2.0, 3.0].contains(&class) {
            return Err(Error::Parse {
                line,
                msg: format!("thyroid class must be 1, 2 or 3, got {class}"),
            });
        }
        rows.push(
            THYROID_COLUMNS
                .iter()
                .map(|&c| number(fields[c], line))
                .collect::<Result<Vec<_>>>()?,
        );
        labels.push(class == 1.0);
    }
    TabularDataset::new("thyroid", rows, labels)
}

/// Levels of each categorical KDD column, in one-hot order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KddVocabulary {
    pub levels: Vec<Vec<String>>,
}

impl KddVocabulary {
    /// Width after one-hot expansion.
    pub fn width(&self) -> usize {
        KDD_FIELDS - KDD_CATEGORICAL.len() + self.levels.iter().map(Vec::len).sum::<usize>()
    }
}

/// Parsed KDD rows with their attack flags.
pub struct KddTable {
    pub vocabulary: KddVocabulary,
    rows: Vec<Vec<f64>>,
    attack: Vec<bool>,
}

impl KddTable {
    fn into_rows(self) -> (Vec<Vec<f64>>, Vec<bool>) {
        (self.rows, self.attack)
    }
}

/// Parses KDD records, one-hot encoding the seven categorical attributes.
/// Without a vocabulary, the levels seen in the file (sorted) are used;
/// with one, an unseen level is a parse error.
pub fn parse_kdd(text: &str, vocabulary: Option<&KddVocabulary>) -> Result<KddTable> {
    let recs: Vec<(usize, Vec<&str>)> = records(text).collect();
    for (line, f) in &recs {
        if f.len() != KDD_FIELDS + 1 {
            return Err(width_err(*line, f.len(), "41 attributes + label"));
        }
    }
    let vocabulary = match vocabulary {
        Some(v) => v.clone(),
        None => KddVocabulary {
            levels: KDD_CATEGORICAL
                .iter()
                .map(|&c| {
                    let set: BTreeSet<&str> = recs.iter().map(|(_, f)| f[c]).collect();
                    set.into_iter().map(str::to_string).collect()
                })
                .collect(),
        },
    };
    let mut rows = Vec::with_capacity(recs.len());
    let mut attack = Vec::with_capacity(recs.len());
    for (line, f) in &recs {
        let mut row = Vec::with_capacity(vocabulary.width());
        for (i, tok) in f[..KDD_FIELDS].iter().enumerate() {
            if let Some(slot) = KDD_CATEGORICAL.iter().position(|&c| c == i) {
                let levels = &vocabulary.levels[slot];
                let hit = levels.iter().position(|l| l == tok).ok_or_else(|| Error::Parse {
                    line: *line,
                    msg: format!("unknown categorical level {tok:?} in column {i}"),
                })?;
                row.extend((0..levels.len()).map(|j| if j == hit { 1.0 } else { 0.0 }));
            } else {
                row.push(number(tok, *line)?);
            }
        }
        rows.push(row);
        attack.push(f[KDD_FIELDS].trim_end_matches('.') != "normal");
    }
    Ok(KddTable {
        vocabulary,
        rows,
        attack,
    })
}

/// Non-attack rows are normal; attacks are subsampled to a quarter of the
/// non-attack count.
fn kdd_rev(rows: Vec<Vec<f64>>, attack: Vec<bool>, seed: u64) -> Result<TabularDataset> {
    let normal = attack.iter().filter(|&&a| !a).count();
    let mut attacks: Vec<usize> = (0..rows.len()).filter(|&i| attack[i]).collect();
    let keep = ((KDD_REV_RATIO * normal as f64).round() as usize).min(attacks.len());
    let mut rng = rng_stream(seed, 0x4b44);
    attacks.shuffle(&mut rng);
    let mut kept: BTreeSet<usize> = attacks[..keep].iter().copied().collect();
    kept.extend((0..rows.len()).filter(|&i| !attack[i]));
    let mut out_rows = Vec::with_capacity(kept.len());
    let mut labels = Vec::with_capacity(kept.len());
    for (i, row) in rows.into_iter().enumerate() {
        if kept.contains(&i) {
            out_rows.push(row);
            labels.push(attack[i]);
        }
    }
    TabularDataset::new("kddrev", out_rows, labels)
}
