use neutral_core::train::{auc, f1_at_contamination};
use proptest::prelude::*;

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn confusion_f1(scores: &[f64], labels: &[bool]) -> f64 {
    let a = labels.iter().filter(|&&l| l).count();
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&x, &y| scores[y].partial_cmp(&scores[x]).unwrap());
    let flagged: Vec<bool> = (0..scores.len()).map(|i| idx[..a].contains(&i)).collect();
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for (&f, &l) in flagged.iter().zip(labels) {
        match (f, l) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        return 0.0;
    }
    let p = tp / (tp + fp);
    let r = tp / (tp + fn_);
    2.0 * p * r / (p + r)
}

fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=64).prop_flat_map(|n| {
        // coarse grid so ties are common
        (prop::collection::vec(0i32..12, n), prop::collection::vec(any::<bool>(), n))
            .prop_map(|(s, mut l)| {
                l[0] = true;
                l[1] = false;
                (s.into_iter().map(|v| v as f64 * 0.25).collect(), l)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn auc_matches_pairwise_oracle((scores, labels) in labeled_scores()) {
        let got = auc(&scores, &labels).unwrap();
        prop_assert!((got - pairwise_auc(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn f1_matches_confusion_matrix((scores, labels) in labeled_scores()) {
        let got = f1_at_contamination(&scores, &labels).unwrap();
        prop_assert!((got - confusion_f1(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn auc_flips_with_negated_scores((scores, labels) in labeled_scores()) {
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let sum = auc(&scores, &labels).unwrap() + auc(&neg, &labels).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }
}
