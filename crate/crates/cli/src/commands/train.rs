use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use omivae_core::data::FoldRound;
use omivae_core::eval::{compute_metrics, EvalReport};
use omivae_core::optim::{save_checkpoint, train_phase, History, LabeledSet, Phase, TrainData};
use omivae_core::{OmiVaeModel, OmicsDataset, RngState};

use super::{create_dir, fold_round, fold_seed, load_dataset, load_run, restrict_modalities, split_tsv, threads, write, RunMeta};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PhaseSelection {
    /// Unsupervised then supervised.
    Both,
    UnsupervisedOnly,
    SupervisedOnly,
}

/// A dataset prepared for one fold: modalities restricted and expression
/// rescaled on the training rows.
struct FoldData {
    ds: OmicsDataset,
    round: FoldRound,
    meta: RunMeta,
}

fn prepare_fold(cfg: &RunConfig, raw: &OmicsDataset, fold: usize) -> CliResult<FoldData> {
    let (e, m) = cfg.modalities();
    let ds = restrict_modalities(raw, e, m)?;
    let round = fold_round(&ds, cfg.folds(), fold, cfg.master_seed())?;
    let scaler = ds.expression_scaler(&round.train)?;
    let ds = match &scaler {
        Some(s) => ds.apply_expression_scaler(s)?,
        None => ds,
    };
    let meta = RunMeta {
        phase: String::new(),
        classes: ds.class_vocab.clone(),
        scaler,
        master_seed: cfg.master_seed(),
        k: cfg.folds(),
        fold,
    };
    Ok(FoldData { ds, round, meta })
}

fn labeled(ds: &OmicsDataset, rows: &[usize]) -> LabeledSet {
    let sub = ds.select(rows);
    LabeledSet {
        input: sub.model_input(),
        labels: sub.labels,
    }
}

fn fresh_model(cfg: &RunConfig, ds: &OmicsDataset, seed: u64) -> CliResult<OmiVaeModel> {
    let config = cfg.model_config(ds.methyl_block_dims(), ds.expr_dim(), ds.num_classes().max(2))?;
    Ok(OmiVaeModel::build(config, &mut RngState::new(seed).derive(0))?)
}

fn run_phases(cfg: &RunConfig, model: &mut OmiVaeModel, fold: &FoldData, seed: u64, phases: &[Phase]) -> CliResult<History> {
    let mut train = cfg.train_config()?;
    train.master_seed = seed;
    let data = TrainData {
        train: labeled(&fold.ds, &fold.round.train),
        validation: labeled(&fold.ds, &fold.round.validation),
        unlabeled: None,
    };
    let mut history = History::default();
    for &phase in phases {
        let (records, summary) = train_phase(model, &data, &train, phase)?;
        history.records.extend(records);
        history.phases.push(summary);
    }
    Ok(history)
}

fn test_report(model: &OmiVaeModel, fold: &FoldData) -> CliResult<Option<EvalReport>> {
    let test = fold.ds.select(&fold.round.test);
    let Some(truth) = &test.labels else { return Ok(None) };
    let pred = model.predict(&test.model_input())?;
    Ok(Some(compute_metrics(truth, &pred, model.config().num_classes)?))
}

fn summary_text(history: &History, report: Option<&EvalReport>) -> String {
    let mut out = String::new();
    for p in &history.phases {
        let name = p.phase.name();
        let _ = writeln!(out, "{name}.epochs_run\t{}", p.epochs_run);
        let _ = writeln!(out, "{name}.best_epoch\t{}", p.best_epoch);
        let _ = writeln!(out, "{name}.best_metric\t{}", p.best_metric);
    }
    if let Some(r) = report {
        let _ = writeln!(out, "test.accuracy\t{}", r.accuracy);
        let _ = writeln!(out, "test.weighted_f1\t{}", r.weighted_f1);
    }
    out
}

/// Train one fold and write `model.ckpt`, `history.tsv`, `split.tsv` and `summary.tsv` to `out`.
pub fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path, selection: PhaseSelection, resume: Option<&Path>) -> CliResult<()> {
    let raw = load_dataset(data)?;
    let fold = prepare_fold(cfg, &raw, cfg.test_fold())?;
    let seed = fold_seed(cfg.master_seed(), fold.meta.fold);

    let (mut model, phases) = match resume {
        None => {
            let phases = match selection {
                PhaseSelection::Both => vec![Phase::Unsupervised, Phase::Supervised],
                PhaseSelection::UnsupervisedOnly => vec![Phase::Unsupervised],
                PhaseSelection::SupervisedOnly => vec![Phase::Supervised],
            };
            (fresh_model(cfg, &fold.ds, seed)?, phases)
        }
        Some(path) => {
            let (ckpt, meta) = load_run(path)?;
            if (meta.master_seed, meta.k, meta.fold) != (fold.meta.master_seed, fold.meta.k, fold.meta.fold) {
                return Err(CliError::validation(format!(
                    "checkpoint was trained with train.master_seed = {}, split.k = {}, split.fold = {}; the configuration differs",
                    meta.master_seed, meta.k, meta.fold
                )));
            }
            if meta.classes != fold.meta.classes {
                return Err(CliError::validation("checkpoint classes differ from the dataset classes"));
            }
            let phases = match (selection, meta.phase.as_str()) {
                (PhaseSelection::Both, "unsupervised") => vec![Phase::Supervised],
                (PhaseSelection::Both, _) => {
                    return Err(CliError::validation(
                        "checkpoint already finished the supervised phase; pass --phase supervised-only to fine-tune again",
                    ))
                }
                (PhaseSelection::UnsupervisedOnly, _) => vec![Phase::Unsupervised],
                (PhaseSelection::SupervisedOnly, _) => vec![Phase::Supervised],
            };
            let c = ckpt.model.config();
            if c.expr_dim != fold.ds.expr_dim() || c.methyl_block_dims != fold.ds.methyl_block_dims() {
                return Err(CliError::validation("checkpoint layout does not match the dataset"));
            }
            (ckpt.model, phases)
        }
    };

    let history = run_phases(cfg, &mut model, &fold, seed, &phases)?;
    let trained_classifier = phases.contains(&Phase::Supervised);
    let report = if trained_classifier { test_report(&model, &fold)? } else { None };

    create_dir(out)?;
    let meta = RunMeta {
        phase: phases[phases.len() - 1].name().to_string(),
        ..fold.meta
    };
    let mut metadata = meta.to_kv();
    for line in cfg.render().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            metadata.set(&format!("config.{k}"), v);
        }
    }
    save_checkpoint(&out.join("model.ckpt"), &model, None, &metadata)?;
    write(&out.join("history.tsv"), &history.to_tsv())?;
    write(&out.join("split.tsv"), &split_tsv(&fold.ds, &fold.round))?;
    let summary = summary_text(&history, report.as_ref());
    write(&out.join("summary.tsv"), &summary)?;
    print!("{summary}");
    Ok(())
}

struct FoldOutcome {
    history: History,
    report: EvalReport,
}

fn run_fold(cfg: &RunConfig, raw: &OmicsDataset, fold: usize) -> CliResult<FoldOutcome> {
    let data = prepare_fold(cfg, raw, fold)?;
    let seed = fold_seed(cfg.master_seed(), fold);
    let mut model = fresh_model(cfg, &data.ds, seed)?;
    let history = run_phases(cfg, &mut model, &data, seed, &[Phase::Unsupervised, Phase::Supervised])?;
    let report = test_report(&model, &data)?.ok_or_else(|| CliError::validation("cross-validation needs labels"))?;
    Ok(FoldOutcome { history, report })
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Every fold as test fold once; per-fold reports plus mean ± sample standard deviation.
pub fn cmd_crossval(cfg: &RunConfig, data: &Path, out: &Path) -> CliResult<()> {
    let raw = load_dataset(data)?;
    let labels = raw.labels.as_deref().ok_or_else(|| CliError::validation("cross-validation needs labels"))?;
    let k = cfg.folds();
    // Surface a too-small class before any training starts.
    omivae_core::data::stratified_kfold(labels, k, cfg.master_seed())?;
    cfg.train_config()?;

    let workers = threads()?.min(k);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CliResult<FoldOutcome>>>> = Mutex::new((0..k).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let fold = next.fetch_add(1, Ordering::SeqCst);
                if fold >= k {
                    break;
                }
                let outcome = run_fold(cfg, &raw, fold);
                results.lock().unwrap_or_else(|e| e.into_inner())[fold] = Some(outcome);
            });
        }
    });

    create_dir(out)?;
    let mut reports = Vec::with_capacity(k);
    for (fold, outcome) in results.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().enumerate() {
        let outcome = outcome.ok_or_else(|| CliError::Runtime(format!("fold {} did not run", fold + 1)))??;
        let dir = out.join(format!("fold_{:02}", fold + 1));
        create_dir(&dir)?;
        write(&dir.join("history.tsv"), &outcome.history.to_tsv())?;
        write(&dir.join("report.tsv"), &outcome.report.to_text(&raw.class_vocab))?;
        write(&dir.join("confusion.tsv"), &outcome.report.confusion_tsv(&raw.class_vocab))?;
        reports.push(outcome.report);
    }

    let columns: [(&str, fn(&EvalReport) -> f64); 4] = [
        ("accuracy", |r| r.accuracy),
        ("weighted_precision", |r| r.weighted_precision),
        ("weighted_recall", |r| r.weighted_recall),
        ("weighted_f1", |r| r.weighted_f1),
    ];
    let mut table = String::from("fold");
    for (name, _) in &columns {
        table.push('\t');
        table.push_str(name);
    }
    table.push('\n');
    for (i, r) in reports.iter().enumerate() {
        let _ = write!(table, "{}", i + 1);
        for (_, f) in &columns {
            let _ = write!(table, "\t{}", f(r));
        }
        table.push('\n');
    }
    let stats: Vec<(f64, f64)> = columns
        .iter()
        .map(|(_, f)| mean_sd(&reports.iter().map(f).collect::<Vec<_>>()))
        .collect();
    for (label, pick) in [("mean", 0), ("sd", 1)] {
        table.push_str(label);
        for s in &stats {
            let _ = write!(table, "\t{}", if pick == 0 { s.0 } else { s.1 });
        }
        table.push('\n');
    }
    write(&out.join("summary.tsv"), &table)?;
    for ((name, _), (mean, sd)) in columns.iter().zip(&stats) {
        println!("{name}\t{mean:.4} ± {sd:.4}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sample_sd() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_sd(&[0.7]), (0.7, 0.0));
    }
}
