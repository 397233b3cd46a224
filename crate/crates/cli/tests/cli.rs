use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_neutral-ad");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("NEUTRAL_AD_REGISTRY")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const QUICK: [&str; 4] = ["--epochs", "15", "--lr", "1e-3"];

fn trained(dir: &Path) {
    let o = run(dir, &[&["train", "--dataset", "synthetic"][..], &QUICK].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn theory_report_passes_and_lists_the_prediction_cell() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["verify-theory"]);
    assert_eq!(code(&o), 0);
    let o = run(dir.path(), &["verify-theory", "--K", "12", "--C", "20"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("L_P") && l.contains(" 12 ") && l.contains(" 20 ")), "{out}");
    assert!(dir.path().join("out/theory.csv").exists());
}

#[test]
fn configuration_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["train", "--dataset", "synthetic", "--k", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("K = 1"));
    assert_eq!(code(&run(dir.path(), &["train", "--dataset", "epilepsy"])), 2);
    assert_eq!(code(&run(dir.path(), &["reproduce", "table9"])), 2);
    assert_eq!(code(&run(dir.path(), &["train", "--dataset", "synthetic", "--n-vs-rest", "2"])), 2);
    assert_eq!(code(&run(dir.path(), &["plot", "sweep_curve"])), 2);
}

#[test]
fn divergence_exits_three() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["train", "--dataset", "synthetic", "--epochs", "3", "--lr", "1e300"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn scores_decompose_into_terms() {
    let dir = TempDir::new().unwrap();
    trained(dir.path());
    std::fs::write(dir.path().join("in.csv"), "x,y\n5,5\n-5,5\n4.5,5.5\n").unwrap();
    let o = run(dir.path(), &["score", "--checkpoint", "out/checkpoint", "--input", "in.csv"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("out/scores.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 2 + 11);
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let sum: f64 = r[2..].iter().sum();
        assert!((sum - r[1]).abs() < 1e-9 * r[1].abs().max(1.0));
        assert!(r[1] >= 0.0);
    }
    // the inlier direction scores below the anomaly direction
    assert!(rows[0][1] < rows[1][1]);
}

#[test]
fn empty_input_gives_empty_output() {
    let dir = TempDir::new().unwrap();
    trained(dir.path());
    std::fs::write(dir.path().join("empty.csv"), " \n").unwrap();
    let o = run(dir.path(), &["score", "--checkpoint", "out/checkpoint", "--input", "empty.csv", "--output", "s.csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("s.csv")).unwrap(), "");
}

#[test]
fn wrong_width_is_a_shape_error() {
    let dir = TempDir::new().unwrap();
    trained(dir.path());
    std::fs::write(dir.path().join("in.csv"), "1,2,3\n").unwrap();
    let o = run(dir.path(), &["score", "--checkpoint", "out/checkpoint", "--input", "in.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn reruns_write_identical_reports() {
    let dir = TempDir::new().unwrap();
    trained(dir.path());
    let first = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    trained(dir.path());
    let second = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    assert_eq!(first, second);
    let other = run(dir.path(), &[&["--seed", "4", "--out", "o4", "train", "--dataset", "synthetic"][..], &QUICK].concat());
    assert_eq!(code(&other), 0);
    assert_ne!(std::fs::read_to_string(dir.path().join("o4/report.json")).unwrap(), first);
}

#[test]
fn tabular_reproduction_of_one_dataset() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["reproduce", "tabular", "--datasets", "synthetic", "--seeds", "0,1", "--epochs", "5"]);
    assert_eq!(code(&o), 0);
    let table = std::fs::read_to_string(dir.path().join("out/tabular.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method,synthetic");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("neutral_ad,") && lines[1].contains('±'));
    assert!(dir.path().join("out/reports/tabular_synthetic_neutral_ad.json").exists());
}

#[test]
fn missing_datasets_leave_marked_gaps() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["reproduce", "tabular", "--datasets", "synthetic,thyroid", "--seeds", "0", "--epochs", "3"]);
    assert_eq!(code(&o), 2);
    let table = std::fs::read_to_string(dir.path().join("out/tabular.csv")).unwrap();
    assert!(table.lines().nth(1).unwrap().ends_with(",missing"));
}

#[test]
fn sweep_then_curve() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["sweep", "--dataset", "synthetic", "--ks", "2,3", "--modes", "residual", "--seeds", "0", "--epochs", "5"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/sweep_synthetic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let o = run(dir.path(), &["plot", "sweep_curve", "--sweep", "out/sweep_synthetic.json", "--svg"]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("out/plots/sweep_curve.svg").exists());
}

#[test]
fn checkpoint_plots() {
    let dir = TempDir::new().unwrap();
    trained(dir.path());
    for kind in ["score_histogram", "mask_heatmap", "simplex_scores"] {
        let o = run(dir.path(), &["plot", kind, "--checkpoint", "out/checkpoint"]);
        assert_eq!(code(&o), 0, "{kind}");
        assert!(dir.path().join(format!("out/plots/{kind}.csv")).exists());
    }
    let o = run(dir.path(), &["plot", "pca_projection", "--checkpoint", "out/checkpoint", "--space", "embedding"]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("out/plots/pca_projection_embedding.csv").exists());
    // two input features cannot give three components
    let o = run(dir.path(), &["plot", "pca_projection", "--checkpoint", "out/checkpoint", "--space", "data"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn registered_table_trains() {
    let dir = TempDir::new().unwrap();
    let mut rows = String::from("a,b,c,label\n");
    for i in 0..60 {
        let anomaly = i % 6 == 0;
        let v = if anomaly { -3.0 } else { 1.0 + (i % 5) as f64 * 0.1 };
        rows.push_str(&format!("{v},{},{},{}\n", v * 0.5 + 2.0, 1.0 + i as f64 * 0.01, anomaly as u8));
    }
    std::fs::write(dir.path().join("t.csv"), rows).unwrap();
    let o = run(dir.path(), &["register-dataset", "toy", "--table", "t.csv", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("datasets.toml").exists());
    let o = run(dir.path(), &["train", "--dataset", "toy", "--epochs", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(dir.path(), &["register-dataset", "bad", "--table", "t.csv"]);
    assert_eq!(code(&o), 2);
}
