//! Subcommand implementations: featurize, split, train, evaluate,
//! predict.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use aaip_core::bench::{classification_metrics, kfold_split, regression_metrics};
use aaip_core::model::{train, Dataset, InteractionModel, Task, TrainReport};
use aaip_core::nn::restore_into;

use crate::config::RunConfig;
use crate::dataset::{assemble, load_embedding_store, load_graph};
use crate::manifest::{read_manifest, PairRecord};
use crate::CliError;

fn manifest_path(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.manifest.clone().ok_or_else(|| CliError::Config("no manifest configured".into()))
}

fn embeddings_path(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.embeddings.clone().ok_or_else(|| CliError::Config("no embeddings file configured".into()))
}

fn load_records(cfg: &RunConfig) -> Result<Vec<PairRecord>, CliError> {
    read_manifest(&manifest_path(cfg)?).map_err(CliError::Data)
}

fn features_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("features")
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("mkdir: {e}")))?;
    }
    std::fs::write(path, content)
        .map_err(|e| CliError::Data(format!("write {}: {e}", path.display())))
}

/// Build and cache the structural graphs for every record, in parallel.
/// Per-record failures are reported but do not abort the run unless every
/// record fails.
pub fn cmd_featurize(cfg: &RunConfig) -> Result<(), CliError> {
    let records = load_records(cfg)?;
    let basis = cfg.basis();
    let dir = features_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("cache dir: {e}")))?;

    // One task per (record, side) with a structure path.
    let mut tasks: Vec<(String, PathBuf, Vec<String>)> = Vec::new();
    for r in &records {
        if let Some(p) = &r.ab_structure_path {
            tasks.push((r.pair_id.clone(), p.clone(), r.ab_chains.clone()));
        }
        if let Some(p) = &r.ag_structure_path {
            tasks.push((r.pair_id.clone(), p.clone(), r.ag_chains.clone()));
        }
    }
    let next = AtomicUsize::new(0);
    let errors: Mutex<Vec<(String, String)>> = Mutex::new(Vec::new());
    let done = AtomicUsize::new(0);
    let jobs = cfg.jobs.max(1);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= tasks.len() {
                    break;
                }
                let (pair_id, path, chains) = &tasks[i];
                match load_graph(path, chains, &basis, Some(&dir)) {
                    Ok(_) => {
                        done.fetch_add(1, Ordering::SeqCst);
                    }
                    Err(e) => errors.lock().unwrap().push((pair_id.clone(), e)),
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    println!(
        "featurize: {} structures cached, {} failed, {} records",
        done.load(Ordering::SeqCst),
        errors.len(),
        records.len()
    );
    for (pair_id, e) in &errors {
        eprintln!("featurize error [{pair_id}]: {e}");
    }
    if !tasks.is_empty() && done.load(Ordering::SeqCst) == 0 {
        return Err(CliError::Data("all featurization tasks failed".into()));
    }
    Ok(())
}

fn splits_csv(folds: &[(Vec<usize>, Vec<usize>)], ids: &[String]) -> String {
    let mut out = String::from("fold,role,pair_id\n");
    for (f, (train_idx, test_idx)) in folds.iter().enumerate() {
        for &i in train_idx {
            let _ = writeln!(out, "{f},train,{}", ids[i]);
        }
        for &i in test_idx {
            let _ = writeln!(out, "{f},test,{}", ids[i]);
        }
    }
    out
}

pub fn cmd_split(cfg: &RunConfig) -> Result<(), CliError> {
    let records = load_records(cfg)?;
    let ids: Vec<String> = records.iter().map(|r| r.pair_id.clone()).collect();
    let folds = kfold_split(records.len(), cfg.folds, cfg.seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let path = cfg.out_dir.join("splits.csv");
    write_file(&path, &splits_csv(&folds, &ids))?;
    println!("split: {} folds over {} records -> {}", cfg.folds, records.len(), path.display());
    Ok(())
}

fn build_dataset(cfg: &RunConfig, records: &[PairRecord]) -> Result<Dataset, CliError> {
    let store = load_embedding_store(&embeddings_path(cfg)?).map_err(CliError::Data)?;
    let need_structures = !cfg.no_structure;
    let (ds, errors) =
        assemble(records, &store, &cfg.basis(), Some(&features_dir(cfg)), need_structures);
    for (pair_id, e) in &errors {
        eprintln!("record error [{pair_id}]: {e}");
    }
    ds.ok_or_else(|| CliError::Data("no usable records in manifest".into()))
}

struct FoldOutcome {
    fold: usize,
    metrics: Vec<(String, f64)>,
}

fn task_metrics(
    task: Task,
    preds: &[f64],
    labels: &[f64],
) -> Result<Vec<(String, f64)>, CliError> {
    match task {
        Task::Affinity => {
            let m = regression_metrics(preds, labels).map_err(|e| CliError::Data(e.to_string()))?;
            Ok(vec![("mae".into(), m.mae), ("pcc".into(), m.pcc)])
        }
        Task::Neutralization => {
            let m = classification_metrics(preds, labels, 0.5)
                .map_err(|e| CliError::Data(e.to_string()))?;
            Ok(vec![
                ("acc".into(), m.acc),
                ("f1".into(), m.f1),
                ("roc_auc".into(), m.roc_auc),
                ("g_mean".into(), m.g_mean),
                ("mcc".into(), m.mcc),
            ])
        }
    }
}

fn metrics_csv(rows: &[(String, Vec<(String, f64)>)]) -> String {
    let names: Vec<&str> = rows[0].1.iter().map(|(n, _)| n.as_str()).collect();
    let mut out = String::from("fold");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (label, vals) in rows {
        out.push_str(label);
        for (_, v) in vals {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Append mean and standard-deviation summary rows over the fold rows.
fn with_summary(rows: Vec<(String, Vec<(String, f64)>)>) -> Vec<(String, Vec<(String, f64)>)> {
    let names: Vec<String> = rows[0].1.iter().map(|(n, _)| n.clone()).collect();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; names.len()];
    for (_, vals) in &rows {
        for (i, (_, v)) in vals.iter().enumerate() {
            mean[i] += v / n;
        }
    }
    let mut var = vec![0.0; names.len()];
    for (_, vals) in &rows {
        for (i, (_, v)) in vals.iter().enumerate() {
            var[i] += (v - mean[i]) * (v - mean[i]) / n;
        }
    }
    let mut out = rows;
    out.push((
        "mean".into(),
        names.iter().cloned().zip(mean.iter().copied()).collect(),
    ));
    out.push((
        "std".into(),
        names.iter().cloned().zip(var.iter().map(|v| v.sqrt())).collect(),
    ));
    out
}

fn history_csv(report: &TrainReport) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for e in &report.history {
        let _ = writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.val_loss);
    }
    out
}

/// 10-fold training: each fold trains on its train split, early-stops on
/// the held-out fold, and reports test metrics on it. Writes per-fold
/// checkpoints and histories plus a metrics CSV with mean/std summary
/// rows.
pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let task = cfg.task().map_err(CliError::Config)?;
    let records = load_records(cfg)?;
    let ds = build_dataset(cfg, &records)?;
    let folds = kfold_split(ds.pairs.len(), cfg.folds, cfg.seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let ids: Vec<String> = ds.pairs.iter().map(|p| p.pair_id.clone()).collect();
    write_file(&cfg.out_dir.join("splits.csv"), &splits_csv(&folds, &ids))?;

    let seq_dim = ds.ab_pool.cols;
    let tc = cfg.train_config();
    let mut outcomes = Vec::new();
    for (fold, (train_idx, test_idx)) in folds.iter().enumerate() {
        let mut model = InteractionModel::new(cfg.model_config(task, seq_dim), cfg.seed.wrapping_add(fold as u64));
        let mut fold_tc = tc.clone();
        fold_tc.seed = cfg.seed.wrapping_add(1_000_003 * fold as u64);
        let report = train(&mut model, &ds, train_idx, test_idx, &fold_tc)
            .map_err(|e| CliError::Data(format!("fold {fold}: {e}")))?;
        let preds = model
            .predict(&ds, test_idx)
            .map_err(|e| CliError::Data(format!("fold {fold}: {e}")))?;
        let labels = ds.labels(test_idx);
        let metrics = task_metrics(task, &preds, &labels)?;
        std::fs::write(cfg.out_dir.join(format!("fold_{fold}.mlpk")), &report.checkpoint)
            .map_err(|e| CliError::Data(format!("checkpoint write: {e}")))?;
        write_file(&cfg.out_dir.join(format!("history_fold_{fold}.csv")), &history_csv(&report))?;
        println!(
            "fold {fold}: best epoch {} (val {}), test {}",
            report.best_epoch,
            report.best_val,
            metrics.iter().map(|(n, v)| format!("{n}={v:.4}")).collect::<Vec<_>>().join(" ")
        );
        outcomes.push(FoldOutcome { fold, metrics });
    }

    let rows: Vec<(String, Vec<(String, f64)>)> =
        outcomes.iter().map(|o| (o.fold.to_string(), o.metrics.clone())).collect();
    let path = cfg.out_dir.join("metrics.csv");
    write_file(&path, &metrics_csv(&with_summary(rows)))?;
    println!("train: wrote {}", path.display());
    Ok(())
}

fn restore_model(cfg: &RunConfig, task: Task, seq_dim: usize, checkpoint: &Path) -> Result<InteractionModel, CliError> {
    let bytes = std::fs::read(checkpoint)
        .map_err(|e| CliError::Data(format!("cannot read checkpoint {}: {e}", checkpoint.display())))?;
    let model = InteractionModel::new(cfg.model_config(task, seq_dim), 0);
    restore_into(&model.checkpoint_params(), &bytes)
        .map_err(|e| CliError::Data(format!("checkpoint {}: {e}", checkpoint.display())))?;
    Ok(model)
}

/// Indices of a named fold's test split according to a splits CSV.
fn fold_test_indices(splits: &Path, fold: usize, ids: &[String]) -> Result<Vec<usize>, CliError> {
    let text = std::fs::read_to_string(splits)
        .map_err(|e| CliError::Data(format!("cannot read splits {}: {e}", splits.display())))?;
    let by_id: BTreeMap<&str, usize> =
        ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Data(format!("splits line {}: expected 3 columns", li + 1)));
        }
        if parts[0] == fold.to_string() && parts[1] == "test" {
            let &i = by_id
                .get(parts[2])
                .ok_or_else(|| CliError::Data(format!("splits names unknown pair '{}'", parts[2])))?;
            out.push(i);
        }
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("fold {fold} has no test records in splits file")));
    }
    Ok(out)
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    checkpoint: &Path,
    splits: Option<&Path>,
    fold: Option<usize>,
) -> Result<(), CliError> {
    if splits.is_some() != fold.is_some() {
        return Err(CliError::Config("--splits and --fold must be given together".into()));
    }
    let task = cfg.task().map_err(CliError::Config)?;
    let records = load_records(cfg)?;
    let ds = build_dataset(cfg, &records)?;
    let model = restore_model(cfg, task, ds.ab_pool.cols, checkpoint)?;
    let ids: Vec<String> = ds.pairs.iter().map(|p| p.pair_id.clone()).collect();
    let idxs: Vec<usize> = match (splits, fold) {
        (Some(s), Some(f)) => fold_test_indices(s, f, &ids)?,
        _ => (0..ds.pairs.len()).collect(),
    };
    let preds = model.predict(&ds, &idxs).map_err(|e| CliError::Data(e.to_string()))?;
    let labels = ds.labels(&idxs);
    let metrics = task_metrics(task, &preds, &labels)?;
    let label = fold.map_or_else(|| "all".to_string(), |f| f.to_string());
    let path = cfg.out_dir.join("metrics_eval.csv");
    write_file(&path, &metrics_csv(&[(label, metrics.clone())]))?;
    println!(
        "evaluate: {}",
        metrics.iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(" ")
    );
    Ok(())
}

pub fn cmd_predict(cfg: &RunConfig, checkpoint: &Path) -> Result<(), CliError> {
    let task = cfg.task().map_err(CliError::Config)?;
    let records = load_records(cfg)?;
    let ds = build_dataset(cfg, &records)?;
    let model = restore_model(cfg, task, ds.ab_pool.cols, checkpoint)?;
    let idxs: Vec<usize> = (0..ds.pairs.len()).collect();
    let preds = model.predict(&ds, &idxs).map_err(|e| CliError::Data(e.to_string()))?;
    let mut out = String::from("pair_id,prediction\n");
    for (p, v) in ds.pairs.iter().zip(&preds) {
        let _ = writeln!(out, "{},{v}", p.pair_id);
    }
    let path = cfg.out_dir.join("predictions.csv");
    write_file(&path, &out)?;
    println!("predict: wrote {} rows to {}", preds.len(), path.display());
    Ok(())
}
