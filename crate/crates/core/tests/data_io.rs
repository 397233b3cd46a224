mod common;

use neutral_core::data::ts::{parse_ts, write_ts, TsCase, TsFile};
use neutral_core::data::{
    n_vs_rest_classes, parse_tabular, split_n_vs_rest, split_one_vs_rest, split_tabular, standardize,
    DatasetEntry, LoadedDataset, Registry, TabularDataset, TabularKind, TimeSeriesDataset,
};
use neutral_core::Error;
use neutral_tensor::Tensor;
use proptest::prelude::*;

/// Every value of a sample of class `c` lies in `[c, c + 1)`.
fn class_coded(n_classes: usize, per_class: usize) -> TimeSeriesDataset {
    let mut ds = common::toy_series(n_classes, per_class, 2, 6, 0);
    let code = |xs: &mut Vec<Tensor>, ys: &[usize]| {
        for (i, (x, &y)) in xs.iter_mut().zip(ys).enumerate() {
            *x = x.map(|_| y as f64 + (i % 10) as f64 / 10.0);
        }
    };
    code(&mut ds.train, &ds.train_labels.clone());
    code(&mut ds.test, &ds.test_labels.clone());
    ds
}

fn class_of(x: &Tensor) -> usize {
    x.data()[0].floor() as usize
}

#[test]
fn one_vs_rest_never_trains_on_anomalies() {
    let ds = class_coded(4, 10);
    for c in 0..4 {
        let s = split_one_vs_rest(&ds, c, 3).unwrap();
        assert!(s.train.iter().all(|x| class_of(x) == c));
        for (x, &l) in s.test.iter().chain(&s.validation).zip(s.test_labels.iter().chain(&s.validation_labels)) {
            assert_eq!(l, class_of(x) != c);
        }
        assert_eq!(s.validation.len(), 4);
        assert!(s.validation_labels.contains(&true) && s.validation_labels.contains(&false));
    }
}

#[test]
fn n_vs_rest_windows_are_cyclic() {
    assert_eq!(n_vs_rest_classes(4, 3, 3).unwrap(), vec![3, 0, 1]);
    assert_eq!(n_vs_rest_classes(10, 0, 9).unwrap().len(), 9);
    assert!(matches!(n_vs_rest_classes(4, 0, 4), Err(Error::Config(_))));
    let ds = class_coded(4, 6);
    let s = split_n_vs_rest(&ds, 2, 3, 0).unwrap();
    assert!(s.train.iter().all(|x| [2, 3, 0].contains(&class_of(x))));
    let anomalies: Vec<usize> = s.test.iter().zip(&s.test_labels).filter(|(_, &l)| l).map(|(x, _)| class_of(x)).collect();
    assert!(!anomalies.is_empty() && anomalies.iter().all(|&c| c == 1));
}

#[test]
fn tabular_split_trains_on_half_the_inliers() {
    let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, 1.0]).collect();
    let labels: Vec<bool> = (0..60).map(|i| i >= 50).collect();
    let ds = TabularDataset::new("t", rows, labels).unwrap();
    let s = split_tabular(&ds, 1).unwrap();
    assert_eq!(s.train.len(), 25);
    assert!(s.train.iter().all(|x| x.data()[0] < 50.0));
    assert_eq!(s.test.len() + s.validation.len(), 35);
    let mut seen: Vec<f64> = s.train.iter().chain(&s.validation).chain(&s.test).map(|x| x.data()[0]).collect();
    seen.sort_by(f64::total_cmp);
    assert_eq!(seen, (0..60).map(f64::from).collect::<Vec<_>>());
}

#[test]
fn standardization_uses_training_statistics() {
    let mut ds = class_coded(2, 10);
    // shift the test partition; the shift must survive standardization
    ds.test = ds.test.iter().map(|x| x.map(|v| v + 100.0)).collect();
    let s = split_one_vs_rest(&ds, 0, 0).unwrap();
    let (z, stats) = standardize(&s);
    let train_mean: f64 = z.train.iter().map(|x| x.data()[0]).sum::<f64>() / z.train.len() as f64;
    assert!(train_mean.abs() < 1e-9);
    assert!(z.test.iter().all(|x| x.data()[0] > 10.0));
    assert_eq!(stats.apply(&s.test[0]), z.test[0]);
}

#[test]
fn registry_loads_series_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let ds = common::toy_series(3, 4, 2, 9, 1);
    ds.write(&dir.path().join("toy_TRAIN.ts"), &dir.path().join("toy_TEST.ts")).unwrap();
    std::fs::write(dir.path().join("t.csv"), "a,b,label\n1,2,0\n3,4,1\n5,6,0\n").unwrap();
    let reg_path = dir.path().join("datasets.toml");
    let mut reg = Registry::open(&reg_path).unwrap();
    reg.register("Toy", DatasetEntry::Uea { train: "toy_TRAIN.ts".into(), test: "toy_TEST.ts".into() });
    reg.register("tiny", DatasetEntry::Tabular { format: TabularKind::Csv, path: "t.csv".into() });
    reg.save(&reg_path).unwrap();

    let reg = Registry::open(&reg_path).unwrap();
    let LoadedDataset::Series(s) = reg.load("toy", 0).unwrap() else { panic!("expected series") };
    assert_eq!((s.channels, s.length, s.n_classes(), s.train.len()), (2, 9, 3, 12));
    for (a, b) in s.train.iter().zip(&ds.train) {
        assert!(a.max_abs_diff(b).unwrap() < 1e-12);
    }
    let LoadedDataset::Table(t) = reg.load("tiny", 0).unwrap() else { panic!("expected table") };
    assert_eq!((t.features(), t.n_anomalies()), (2, 1));
    let err = reg.load("epilepsy", 0).unwrap_err().to_string();
    assert!(err.contains("toy") && err.contains("tiny"), "{err}");
}

#[test]
fn raw_thyroid_marks_class_one() {
    let row = |class: u32| {
        let mut f: Vec<String> = (0..21).map(|i| format!("0.{i}")).collect();
        f.push(class.to_string());
        f.join(" ")
    };
    let text = [row(3), row(1), row(2)].join("\n");
    let ds = parse_tabular(&text, TabularKind::Thyroid, 0).unwrap();
    assert_eq!(ds.features(), 6);
    assert_eq!(ds.anomalous, vec![false, true, false]);
    assert_eq!(ds.rows[0].data(), &[0.0, 0.16, 0.17, 0.18, 0.19, 0.2]);
}

#[test]
fn raw_arrhythmia_drops_angle_attributes() {
    let row = |class: u32| {
        let mut f: Vec<String> = (0..279).map(|i| if (10..15).contains(&i) { "?".into() } else { i.to_string() }).collect();
        f.push(class.to_string());
        f.join(",")
    };
    let text = [row(1), row(3), row(16)].join("\n");
    let ds = parse_tabular(&text, TabularKind::Arrhythmia, 0).unwrap();
    assert_eq!(ds.features(), 274);
    assert_eq!(ds.anomalous, vec![false, true, false]);
    assert_eq!(ds.rows[0].data()[10], 15.0);
}

#[test]
fn kdd_rev_keeps_a_quarter_as_many_attacks() {
    let line = |label: &str, proto: &str| {
        let mut f = vec!["0".to_string(), proto.into(), "http".into(), "SF".into()];
        f.extend((4..41).map(|_| "0".to_string()));
        f.push(format!("{label}."));
        f.join(",")
    };
    let mut lines: Vec<String> = (0..40).map(|_| line("normal", "tcp")).collect();
    lines.extend((0..30).map(|_| line("smurf", "icmp")));
    let text = lines.join("\n");
    let kdd = parse_tabular(&text, TabularKind::Kdd, 0).unwrap();
    assert_eq!(kdd.n_anomalies(), 40);
    let rev = parse_tabular(&text, TabularKind::KddRev, 5).unwrap();
    assert_eq!((rev.rows.len(), rev.n_anomalies()), (50, 10));
}

fn ts_file() -> impl Strategy<Value = TsFile> {
    (1usize..4, 1usize..6, 1usize..5).prop_flat_map(|(channels, len, n)| {
        prop::collection::vec(
            (prop::collection::vec(prop::collection::vec(-1e6f64..1e6, len), channels), 0usize..3),
            n,
        )
        .prop_map(|cases| TsFile {
            problem_name: "prop".into(),
            headers: vec!["timeStamps false".into(), "univariate false".into()],
            class_labels: Some(vec!["a".into(), "b".into(), "c".into()]),
            cases: cases
                .into_iter()
                .map(|(dims, l)| TsCase { dims, label: Some(["a", "b", "c"][l].into()) })
                .collect(),
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ts_round_trip(file in ts_file()) {
        prop_assert_eq!(parse_ts(&write_ts(&file)).unwrap(), file);
    }
}

#[test]
fn ts_errors_carry_line_numbers() {
    let text = "@problemName x\n@classLabel true a b\n@data\n1,2:a\n1,2:z\n";
    match parse_ts(text) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
}
