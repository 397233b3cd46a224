use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use log::{info, warn};
use neutral_core::data::ts::parse_ts;
use neutral_core::data::{
    apply_rule, dataset_rule, split_dataset, DatasetEntry, LoadedDataset, Protocol,
};
use neutral_core::model::Objective;
use neutral_core::nn::Parametrization;
use neutral_core::plot::{
    mask_heatmap, pca_projection, score_histogram, simplex_scores, sweep_curve, PlotData, PlotKind,
    ProjectionSpace,
};
use neutral_core::theory::{verify_grid, TheoryGrid};
use neutral_core::train::checkpoint::{self, Checkpoint};
use neutral_core::train::{
    k_sweep, run_protocol, run_split, score_all, totals, MetricSummary, ProtocolSpec, RunReport,
    SweepTable,
};
use neutral_core::Error;
use neutral_tensor::Tensor;

use crate::context::Context;
use crate::{
    PlotArgs, ProtocolArg, RegisterArgs, ReproduceArgs, ScoreArgs, SpaceArg, SweepArgs, Table,
    TheoryArgs, TheoryFailure, TrainArgs,
};

const DEFAULT_SEEDS: u64 = 5;
const SWEEP_KS: std::ops::RangeInclusive<usize> = 2..=15;

fn absolute(p: &Path) -> anyhow::Result<PathBuf> {
    std::fs::canonicalize(p).with_context(|| format!("cannot open {}", p.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn register(ctx: &Context, a: RegisterArgs) -> anyhow::Result<()> {
    let entry = match (a.train, a.test, a.table, a.format) {
        (Some(train), Some(test), None, _) => DatasetEntry::Uea {
            train: absolute(&train)?,
            test: absolute(&test)?,
        },
        (None, None, Some(table), Some(format)) => DatasetEntry::Tabular {
            format,
            path: absolute(&table)?,
        },
        _ => {
            return Err(Error::Config(
                "give either --train and --test, or --table and --format".into(),
            )
            .into())
        }
    };
    let mut reg = ctx.registry()?;
    reg.register(&a.name, entry);
    let ds = reg
        .load(&a.name, ctx.seed)
        .with_context(|| format!("{} does not load", a.name))?;
    reg.save(&ctx.registry_path)?;
    match &ds {
        LoadedDataset::Series(d) => info!(
            "registered {}: {} channels × {}, {} classes, {} train / {} test",
            d.name,
            d.channels,
            d.length,
            d.n_classes(),
            d.train.len(),
            d.test.len()
        ),
        LoadedDataset::Table(d) => info!(
            "registered {}: {} rows × {} features, {} anomalies",
            d.name,
            d.rows.len(),
            d.features(),
            d.n_anomalies()
        ),
    }
    Ok(())
}

pub fn train(ctx: &Context, a: TrainArgs) -> anyhow::Result<()> {
    let ds = ctx.load_dataset(&a.dataset, ctx.seed)?;
    let cfg = ctx.train_config(&a.dataset, &a.overrides);
    let (spec, protocol) = match (&ds, a.n_vs_rest) {
        (LoadedDataset::Series(_), None) => (
            ProtocolSpec::OneVsRest,
            Protocol::OneVsRest {
                normal_class: a.normal_class,
            },
        ),
        (LoadedDataset::Series(_), Some(n)) => (
            ProtocolSpec::NVsRest { n },
            Protocol::NVsRest {
                start_class: a.normal_class,
                n,
            },
        ),
        (LoadedDataset::Table(_), None) => (ProtocolSpec::Tabular, Protocol::Tabular),
        (LoadedDataset::Table(d), Some(_)) => {
            return Err(Error::Config(format!("{} is tabular; --n-vs-rest does not apply", d.name)).into())
        }
    };
    cfg.validate(ds.shape())?;
    let split = split_dataset(&ds, protocol, cfg.seed)?;
    info!(
        "training on {} ({} train, {} validation, {} test)",
        ds.name(),
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    let run = run_split(&cfg, ds.name(), &split)?;
    let out = ctx.out_dir()?;
    let ckpt_dir = out.join("checkpoint");
    checkpoint::save(
        &Checkpoint {
            model: run.outcome.model,
            dataset: ds.name().to_string(),
            seed: cfg.seed,
            standardization: run.standardization,
            protocol: Some(split.descriptor.clone()),
        },
        &ckpt_dir,
    )?;
    info!(
        "best epoch {} of {}; test AUC {}, F1 {}",
        run.sub.best_epoch,
        run.sub.epochs_run,
        fmt_opt(run.sub.auc),
        fmt_opt(run.sub.f1)
    );
    let report = RunReport::from_runs(
        ds.name(),
        spec,
        &cfg,
        &[cfg.seed],
        vec![split.descriptor.normal_classes.clone()],
        vec![run.sub],
    );
    write_file(&out.join("report.json"), report.to_json()?)?;
    println!("{}", ckpt_dir.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |v| format!("{v:.4}"))
}

/// Samples of a score input with their row ids.
fn read_samples(path: &Path, ckpt: &Checkpoint) -> anyhow::Result<(Vec<usize>, Vec<Tensor>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut ids = Vec::new();
    let mut samples = Vec::new();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ts")) {
        let file = parse_ts(&text)?;
        let (_, rule) = dataset_rule(&ckpt.dataset);
        for (i, case) in file.cases.iter().enumerate() {
            let Some(case) = apply_rule(&ckpt.dataset, std::slice::from_ref(case), rule)?.pop() else {
                warn!("case {i} skipped by the {} length rule", ckpt.dataset);
                continue;
            };
            ids.push(i);
            samples.push(Tensor::new(vec![case.dims.len(), case.length()], case.dims.concat())?);
        }
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            let values: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match values {
                Ok(v) => {
                    ids.push(ids.len());
                    samples.push(Tensor::vector(&v));
                }
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: e.to_string(),
                    }
                    .into())
                }
            }
        }
    }
    let want = ckpt.model.sample_shape().dims();
    if let Some((id, x)) = ids.iter().zip(&samples).find(|(_, x)| x.shape() != want.as_slice()) {
        return Err(Error::Config(format!(
            "sample {id} has shape {:?}; the checkpoint expects {want:?}",
            x.shape()
        ))
        .into());
    }
    Ok((ids, samples))
}

pub fn score(ctx: &Context, a: ScoreArgs) -> anyhow::Result<()> {
    let ckpt = checkpoint::load(&a.checkpoint)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let (ids, samples) = read_samples(&a.input, &ckpt)?;
    let output = match a.output {
        Some(p) => p,
        None => ctx.out_dir()?.join("scores.csv"),
    };
    if samples.is_empty() {
        write_file(&output, "")?;
        info!("no samples in {}", a.input.display());
        return Ok(());
    }
    let scores = score_all(&ckpt.model, &ckpt.prepare(&samples))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "total".to_string()];
    header.extend((1..=ckpt.model.k()).map(|k| format!("t{k}")));
    w.write_record(&header)?;
    for (id, s) in ids.iter().zip(&scores) {
        let mut row = vec![id.to_string(), s.total.to_string()];
        row.extend(s.per_transformation.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    write_file(&output, w.into_inner()?)?;
    info!("scored {} samples into {}", scores.len(), output.display());
    Ok(())
}

fn table_datasets(table: Table) -> &'static [&'static str] {
    match table {
        Table::TsOneVsRest | Table::TsNVsRest => &["sad", "natops", "ct", "epilepsy", "rs"],
        Table::Tabular => &["arrhythmia", "thyroid", "kdd", "kddrev"],
    }
}

fn protocol_for(table: Table, ds: &LoadedDataset, n: Option<usize>) -> anyhow::Result<ProtocolSpec> {
    Ok(match (table, ds) {
        (Table::TsOneVsRest, LoadedDataset::Series(_)) => ProtocolSpec::OneVsRest,
        (Table::TsNVsRest, LoadedDataset::Series(d)) => ProtocolSpec::NVsRest {
            n: n.unwrap_or(d.n_classes().saturating_sub(1)),
        },
        (Table::Tabular, LoadedDataset::Table(_)) => ProtocolSpec::Tabular,
        (Table::Tabular, _) => {
            return Err(Error::Config(format!("{} is not a tabular dataset", ds.name())).into())
        }
        _ => return Err(Error::Config(format!("{} is not a time-series dataset", ds.name())).into()),
    })
}

fn cell(m: Option<&MetricSummary>) -> String {
    match m {
        Some(m) => format!("{:.1} ± {:.1}", 100.0 * m.mean, 100.0 * m.std),
        None => "undefined".into(),
    }
}

const GAP: &str = "missing";

pub fn reproduce(ctx: &Context, a: ReproduceArgs) -> anyhow::Result<()> {
    let names: Vec<String> = if a.datasets.is_empty() {
        table_datasets(a.table).iter().map(|s| s.to_string()).collect()
    } else {
        a.datasets.iter().map(|s| s.to_ascii_lowercase()).collect()
    };
    let seeds = ctx.seeds(&a.seeds, DEFAULT_SEEDS);
    let mut methods = vec![("neutral_ad", Objective::Dcl)];
    if a.with_fixed_ts && a.table != Table::Tabular {
        methods.push(("fixed_ts", Objective::TpFixed));
    }
    let table_name = a.table.to_possible_value_name();
    let out = ctx.out_dir()?.to_path_buf();
    let mut results: BTreeMap<(String, &str), String> = BTreeMap::new();
    let mut missing = Vec::new();
    for name in &names {
        let ds = match ctx.load_dataset(name, ctx.seed) {
            Ok(ds) => ds,
            Err(e) => {
                warn!("{name}: {e:#}");
                missing.push(name.clone());
                continue;
            }
        };
        let spec = protocol_for(a.table, &ds, a.n)?;
        for &(method, objective) in &methods {
            let cfg = neutral_core::train::TrainConfig {
                objective,
                ..ctx.train_config(name, &a.overrides)
            };
            info!("{table_name}: {name} / {method} over seeds {seeds:?}");
            let report = run_protocol(&ds, spec, &cfg, &seeds)?;
            write_file(
                &out.join("reports").join(format!("{table_name}_{name}_{method}.json")),
                report.to_json()?,
            )?;
            let metric = if a.table == Table::Tabular {
                report.macro_f1.as_ref()
            } else {
                report.macro_auc.as_ref()
            };
            results.insert((name.clone(), method), cell(metric));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let lookup = |name: &String, method: &str| {
        results
            .get(&(name.clone(), method))
            .cloned()
            .unwrap_or_else(|| GAP.into())
    };
    if a.table == Table::Tabular {
        let mut header = vec!["method".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for &(method, _) in &methods {
            let mut row = vec![method.to_string()];
            row.extend(names.iter().map(|n| lookup(n, method)));
            w.write_record(&row)?;
        }
    } else {
        let mut header = vec!["dataset".to_string()];
        header.extend(methods.iter().map(|m| m.0.to_string()));
        w.write_record(&header)?;
        for name in &names {
            let mut row = vec![name.clone()];
            row.extend(methods.iter().map(|m| lookup(name, m.0)));
            w.write_record(&row)?;
        }
    }
    let path = out.join(format!("{table_name}.csv"));
    let bytes = w.into_inner()?;
    print!("{}", String::from_utf8_lossy(&bytes));
    write_file(&path, bytes)?;
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "datasets not available: {} (gaps marked {GAP:?} in {})",
            missing.join(", "),
            path.display()
        ))
        .into());
    }
    Ok(())
}

trait PossibleValueName {
    fn to_possible_value_name(&self) -> String;
}

impl<T: clap::ValueEnum> PossibleValueName for T {
    fn to_possible_value_name(&self) -> String {
        self.to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default()
    }
}

pub fn sweep(ctx: &Context, a: SweepArgs) -> anyhow::Result<()> {
    let ds = ctx.load_dataset(&a.dataset, ctx.seed)?;
    let spec = match (a.protocol, &ds) {
        (None, d) => ProtocolSpec::default_for(d),
        (Some(ProtocolArg::OneVsRest), _) => ProtocolSpec::OneVsRest,
        (Some(ProtocolArg::Tabular), _) => ProtocolSpec::Tabular,
        (Some(ProtocolArg::NVsRest), LoadedDataset::Series(d)) => ProtocolSpec::NVsRest {
            n: a.n.unwrap_or(d.n_classes().saturating_sub(1)),
        },
        (Some(ProtocolArg::NVsRest), LoadedDataset::Table(d)) => {
            return Err(Error::Config(format!("{} is tabular; n_vs_rest does not apply", d.name)).into())
        }
    };
    let ks: Vec<usize> = if a.ks.is_empty() { SWEEP_KS.collect() } else { a.ks };
    let modes = if a.modes.is_empty() {
        Parametrization::ALL.to_vec()
    } else {
        a.modes
    };
    let seeds = ctx.seeds(&a.seeds, DEFAULT_SEEDS);
    let cfg = ctx.train_config(&a.dataset, &a.overrides);
    info!(
        "sweeping {} over K {ks:?}, {} modes, {} seeds",
        ds.name(),
        modes.len(),
        seeds.len()
    );
    let table = k_sweep(&ds, spec, &ks, &modes, &seeds, &cfg)?;
    let out = ctx.out_dir()?;
    let csv = table.to_csv()?;
    write_file(&out.join(format!("sweep_{}.csv", ds.name())), &csv)?;
    write_file(
        &out.join(format!("sweep_{}.json", ds.name())),
        serde_json::to_string_pretty(&table)?,
    )?;
    print!("{csv}");
    Ok(())
}

pub fn verify_theory(ctx: &Context, a: TheoryArgs) -> anyhow::Result<()> {
    let mut grid = TheoryGrid {
        seed: ctx.seed,
        ..TheoryGrid::default()
    };
    if !a.ks.is_empty() {
        grid.ks = a.ks;
    }
    if !a.cs.is_empty() {
        grid.cs = a.cs;
    }
    if !a.taus.is_empty() {
        grid.taus = a.taus;
    }
    let reports = verify_grid(&grid)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "loss", "edge_case", "k", "c", "tau", "analytic", "numeric", "gradient_norm", "passed",
    ])?;
    println!(
        "{:<5} {:<15} {:>3} {:>6} {:>5} {:>14} {:>14} {:>11}  status",
        "loss", "case", "K", "C", "tau", "analytic", "numeric", "|grad|"
    );
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passed() { "ok" } else { "FAIL" };
        println!(
            "{:<5} {:<15} {:>3} {:>6} {:>5} {:>14.8e} {:>14.8e} {:>11.3e}  {status}",
            r.loss_name.to_string(),
            r.edge_case.to_string(),
            r.k,
            r.c,
            r.tau,
            r.analytic_value,
            r.numeric_value,
            r.gradient_norm
        );
        w.write_record([
            r.loss_name.to_string(),
            r.edge_case.to_string(),
            r.k.to_string(),
            r.c.to_string(),
            r.tau.to_string(),
            r.analytic_value.to_string(),
            r.numeric_value.to_string(),
            r.gradient_norm.to_string(),
            r.passed().to_string(),
        ])?;
        if !r.passed() {
            failed.push(format!("{} {} K={} C={} tau={}", r.loss_name, r.edge_case, r.k, r.c, r.tau));
        }
    }
    write_file(&ctx.out_dir()?.join("theory.csv"), w.into_inner()?)?;
    if failed.is_empty() {
        info!("all {} checks passed", reports.len());
        Ok(())
    } else {
        Err(TheoryFailure(failed.join("; ")).into())
    }
}

pub fn plot(ctx: &Context, a: PlotArgs) -> anyhow::Result<()> {
    let dir = ctx.out_dir()?.join("plots");
    let mut plots: Vec<(String, PlotData)> = Vec::new();
    if a.kind == PlotKind::SweepCurve {
        let path = a
            .sweep
            .ok_or_else(|| Error::Config("sweep_curve needs --sweep <sweep json>".into()))?;
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let table: SweepTable = serde_json::from_str(&text)?;
        plots.push((a.kind.name().into(), sweep_curve(&table)));
    } else {
        let path = a
            .checkpoint
            .ok_or_else(|| Error::Config(format!("{} needs --checkpoint", a.kind)))?;
        let ckpt = checkpoint::load(&path)?;
        let descriptor = ckpt.protocol.clone().ok_or_else(|| {
            Error::Config("checkpoint does not record its split; retrain with `train`".into())
        })?;
        let ds = ctx.load_dataset(&ckpt.dataset, ckpt.seed)?;
        let split = split_dataset(&ds, descriptor.protocol, descriptor.seed)?;
        let test = ckpt.prepare(&split.test);
        let labels = &split.test_labels;
        let pick = |want: bool| -> Vec<Tensor> {
            test.iter()
                .zip(labels)
                .filter(|(_, &l)| l == want)
                .take(a.samples)
                .map(|(x, _)| x.clone())
                .collect()
        };
        let meta = |p: PlotData| {
            p.with_meta("dataset", &ckpt.dataset)
                .with_meta("seed", ckpt.seed)
                .with_meta("normal_classes", format!("{:?}", descriptor.normal_classes))
        };
        match a.kind {
            PlotKind::ScoreHistogram => {
                let s = totals(&score_all(&ckpt.model, &test)?);
                plots.push((a.kind.name().into(), meta(score_histogram(&s, labels, a.bins)?)));
            }
            PlotKind::SimplexScores => {
                let s = score_all(&ckpt.model, &test)?;
                plots.push((a.kind.name().into(), meta(simplex_scores(&s, labels)?)));
            }
            PlotKind::MaskHeatmap => {
                plots.push((a.kind.name().into(), meta(mask_heatmap(&ckpt.model, &pick(false))?)));
            }
            PlotKind::PcaProjection => {
                let spaces = match a.space {
                    SpaceArg::Data => vec![ProjectionSpace::Data],
                    SpaceArg::Embedding => vec![ProjectionSpace::Embedding],
                    SpaceArg::Both => vec![ProjectionSpace::Data, ProjectionSpace::Embedding],
                };
                let (inliers, anomalies) = (pick(false), pick(true));
                for space in spaces {
                    let p = pca_projection(&ckpt.model, &inliers, &anomalies, space)?;
                    let stem = format!("{}_{}", a.kind, p.metadata["space"]);
                    plots.push((stem, meta(p)));
                }
            }
            PlotKind::SweepCurve => unreachable!(),
        }
    }
    for (stem, p) in &plots {
        p.write(&dir, stem, a.svg)?;
        info!("wrote {}", dir.join(format!("{stem}.csv")).display());
    }
    Ok(())
}
