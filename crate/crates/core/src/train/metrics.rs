use crate::{Error, Result};

fn counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

/// Area under the ROC curve of `scores` for the positive (`true`) class,
/// via the rank statistic with midranks for ties.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (pos, neg) = counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs both anomalies and inliers".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("AUC of NaN scores".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// F1 of the anomaly class when the `A` highest scores are flagged, `A`
/// being the true anomaly count. Equal scores keep their input order.
pub fn f1_at_contamination(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (a, _) = counts(labels);
    if a == 0 {
        return Err(Error::UndefinedMetric(
            "F1 at contamination needs at least one anomaly".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable: ties stay in input order
    order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]));
    let tp = order[..a].iter().filter(|&&i| labels[i]).count() as f64;
    // precision and recall share the denominator A
    let precision = tp / a as f64;
    let recall = tp / a as f64;
    Ok(if tp == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
