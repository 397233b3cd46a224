//! Plot data for score histograms, view projections, masks, score simplices
//! and K sweeps, written as CSV with an optional static SVG.

mod pca;
mod svg;

use std::collections::BTreeMap;
use std::path::Path;

use neutral_tensor::Tensor;
use serde::{Deserialize, Serialize};

pub use pca::Pca;

use crate::losses::ScoreBreakdown;
use crate::model::{Model, Transformations};
use crate::train::SweepTable;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    ScoreHistogram,
    PcaProjection,
    MaskHeatmap,
    SimplexScores,
    SweepCurve,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::ScoreHistogram,
        PlotKind::PcaProjection,
        PlotKind::MaskHeatmap,
        PlotKind::SimplexScores,
        PlotKind::SweepCurve,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PlotKind::ScoreHistogram => "score_histogram",
            PlotKind::PcaProjection => "pca_projection",
            PlotKind::MaskHeatmap => "mask_heatmap",
            PlotKind::SimplexScores => "simplex_scores",
            PlotKind::SweepCurve => "sweep_curve",
        }
    }
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = PlotKind::ALL.iter().map(PlotKind::name).collect();
                Error::Config(format!("unknown plot kind {s:?} (expected one of {})", names.join(", ")))
            })
    }
}

impl std::fmt::Display for PlotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Named numeric columns of equal length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub kind: PlotKind,
    pub columns: Vec<(String, Vec<f64>)>,
    pub metadata: BTreeMap<String, String>,
}

impl PlotData {
    fn new(kind: PlotKind) -> Self {
        Self {
            kind,
            columns: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.columns.push((name.into(), values));
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = crate::train::csv_err;
        w.write_record(self.columns.iter().map(|(n, _)| n.as_str()))
            .map_err(csv_err)?;
        for r in 0..self.rows() {
            w.write_record(self.columns.iter().map(|(_, v)| v[r].to_string()))
                .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }

    pub fn to_svg(&self) -> String {
        svg::render(self)
    }

    /// Writes `<stem>.csv`, `<stem>.json` (kind and metadata) and, if
    /// requested, `<stem>.svg`.
    pub fn write(&self, dir: &Path, stem: &str, with_svg: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv()?)?;
        let meta = serde_json::json!({ "kind": self.kind, "metadata": self.metadata });
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
        if with_svg {
            std::fs::write(dir.join(format!("{stem}.svg")), self.to_svg())?;
        }
        Ok(())
    }
}

/// Binned score counts per label over shared, equal-width bins.
pub fn score_histogram(scores: &[f64], labels: &[bool], bins: usize) -> Result<PlotData> {
    if scores.len() != labels.len() || scores.is_empty() || bins == 0 {
        return Err(Error::Config(
            "histogram needs matching nonempty scores and labels, and bins > 0".into(),
        ));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = [vec![0.0; bins], vec![0.0; bins]];
    for (&s, &l) in scores.iter().zip(labels) {
        let b = (((s - lo) / width) as usize).min(bins - 1);
        counts[l as usize][b] += 1.0;
    }
    let mut p = PlotData::new(PlotKind::ScoreHistogram);
    p.push("bin_lo", (0..bins).map(|b| lo + b as f64 * width).collect());
    p.push("bin_hi", (0..bins).map(|b| lo + (b + 1) as f64 * width).collect());
    let [inliers, anomalies] = counts;
    p.push("inliers", inliers);
    p.push("anomalies", anomalies);
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionSpace {
    Data,
    Embedding,
}

impl ProjectionSpace {
    fn name(&self) -> &'static str {
        match self {
            ProjectionSpace::Data => "data",
            ProjectionSpace::Embedding => "embedding",
        }
    }
}

/// Top-3 principal components of every sample and its views. The basis is
/// fit on inlier points only; anomalies are projected into it.
pub fn pca_projection(
    model: &Model,
    inliers: &[Tensor],
    anomalies: &[Tensor],
    space: ProjectionSpace,
) -> Result<PlotData> {
    let points = |x: &Tensor| -> Result<Vec<Vec<f64>>> {
        Ok(match space {
            ProjectionSpace::Data => std::iter::once(x.clone())
                .chain(model.views(x)?)
                .map(|v| v.to_vec())
                .collect(),
            ProjectionSpace::Embedding => {
                let z = model.embeddings(x)?;
                (0..z.shape()[0])
                    .map(|i| z.index_leading(i).map(|t| t.to_vec()))
                    .collect::<std::result::Result<_, _>>()?
            }
        })
    };
    let mut fit_rows = Vec::new();
    for x in inliers {
        fit_rows.extend(points(x)?);
    }
    let pca = Pca::fit(&fit_rows, 3)?;
    let mut cols: [Vec<f64>; 6] = Default::default();
    for (label, set) in [(0.0, inliers), (1.0, anomalies)] {
        for (i, x) in set.iter().enumerate() {
            for (view, row) in points(x)?.iter().enumerate() {
                let proj = pca.project(row)?;
                cols[0].push(i as f64);
                cols[1].push(label);
                cols[2].push(view as f64);
                for c in 0..3 {
                    cols[3 + c].push(proj[c]);
                }
            }
        }
    }
    let mut p = PlotData::new(PlotKind::PcaProjection).with_meta("space", space.name());
    for (name, col) in ["sample", "anomaly", "view", "pc1", "pc2", "pc3"].iter().zip(cols) {
        p.push(*name, col);
    }
    for (c, ev) in pca.eigenvalues.iter().enumerate() {
        p.metadata.insert(format!("eigenvalue{}", c + 1), ev.to_string());
    }
    Ok(p)
}

/// `M_k(x)` for every transformation and chosen sample, in long format.
pub fn mask_heatmap(model: &Model, samples: &[Tensor]) -> Result<PlotData> {
    let Transformations::Learned(stack) = &model.transforms else {
        return Err(Error::Config("fixed transformations have no masks".into()));
    };
    let mut cols: [Vec<f64>; 5] = Default::default();
    for (i, x) in samples.iter().enumerate() {
        let (rows, width) = match x.shape() {
            [c, l] => (*c, *l),
            [d] => (1, *d),
            s => return Err(Error::Config(format!("cannot plot masks of shape {s:?}"))),
        };
        for (k, mask) in stack.masks().iter().enumerate() {
            let m = mask.apply(x)?;
            for r in 0..rows {
                for t in 0..width {
                    cols[0].push(i as f64);
                    cols[1].push(k as f64);
                    cols[2].push(r as f64);
                    cols[3].push(t as f64);
                    cols[4].push(m.data()[r * width + t]);
                }
            }
        }
    }
    let mut p = PlotData::new(PlotKind::MaskHeatmap).with_meta("mode", stack.mode());
    for (name, col) in ["sample", "k", "row", "col", "value"].iter().zip(cols) {
        p.push(*name, col);
    }
    Ok(p)
}

/// Per-transformation score shares: nonnegative rows summing to one.
pub fn simplex_scores(scores: &[ScoreBreakdown], labels: &[bool]) -> Result<PlotData> {
    if scores.len() != labels.len() {
        return Err(Error::Config("scores and labels differ in length".into()));
    }
    let k = scores.first().map_or(0, |s| s.per_transformation.len());
    let shares: Vec<Vec<f64>> = scores.iter().map(ScoreBreakdown::shares).collect();
    let mut p = PlotData::new(PlotKind::SimplexScores).with_meta("k", k);
    p.push("anomaly", labels.iter().map(|&l| l as u8 as f64).collect());
    for j in 0..k {
        p.push(format!("share{}", j + 1), shares.iter().map(|s| s[j]).collect());
    }
    Ok(p)
}

/// Metric mean and std against K, one column pair per parametrization.
pub fn sweep_curve(table: &SweepTable) -> PlotData {
    let mut ks: Vec<usize> = table.cells.iter().map(|c| c.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut modes = Vec::new();
    for c in &table.cells {
        if !modes.contains(&c.mode) {
            modes.push(c.mode);
        }
    }
    let mut p = PlotData::new(PlotKind::SweepCurve)
        .with_meta("dataset", &table.dataset)
        .with_meta("metric", &table.metric);
    p.push("k", ks.iter().map(|&k| k as f64).collect());
    for mode in modes {
        let cell = |k: usize| table.cells.iter().find(|c| c.k == k && c.mode == mode);
        p.push(
            format!("{}_mean", mode.name()),
            ks.iter().map(|&k| cell(k).map_or(f64::NAN, |c| c.metric.mean)).collect(),
        );
        p.push(
            format!("{}_std", mode.name()),
            ks.iter().map(|&k| cell(k).map_or(f64::NAN, |c| c.metric.std)).collect(),
        );
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scores_do_not_share_bins() {
        let scores = [0.0, 0.1, 0.2, 0.9, 1.0];
        let labels = [false, false, false, true, true];
        let p = score_histogram(&scores, &labels, 4).unwrap();
        let (a, b) = (p.column("inliers").unwrap(), p.column("anomalies").unwrap());
        assert!(a.iter().zip(b).all(|(x, y)| *x == 0.0 || *y == 0.0));
        assert_eq!(a.iter().sum::<f64>() + b.iter().sum::<f64>(), 5.0);
    }

    #[test]
    fn simplex_rows_are_barycentric() {
        let s = [
            ScoreBreakdown::from_terms(&[1.0, 2.0, 1.0]),
            ScoreBreakdown::from_terms(&[0.0, 0.0, 0.0]),
        ];
        let p = simplex_scores(&s, &[false, true]).unwrap();
        for r in 0..2 {
            let row: Vec<f64> = (1..=3).map(|j| p.column(&format!("share{j}")).unwrap()[r]).collect();
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kind_names_parse() {
        for k in PlotKind::ALL {
            assert_eq!(k.name().parse::<PlotKind>().unwrap(), k);
        }
        assert!("bar".parse::<PlotKind>().is_err());
    }
}
