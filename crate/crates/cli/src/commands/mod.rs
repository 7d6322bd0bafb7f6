//! Subcommand implementations and the helpers they share.

mod data;
mod inspect;
mod train;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use omivae_core::data::{load_dataset_cache, stratified_kfold, write_text, FoldRound, MinMaxScaler};
use omivae_core::optim::Checkpoint;
use omivae_core::{KvDoc, OmiVaeModel, OmicsDataset, RngState};

use crate::error::{CliError, CliResult};

pub use data::{cmd_preprocess, cmd_synth, PreprocessInputs};
pub use inspect::{cmd_embed, cmd_evaluate, cmd_plot, RowFilter};
pub use train::{cmd_crossval, cmd_train, PhaseSelection};

/// Seed for everything inside one fold: model initialization and the
/// training streams. `train` with `split.fold = r` reproduces fold r of `crossval`.
pub fn fold_seed(master: u64, fold: usize) -> u64 {
    RngState::new(master).derive(fold as u64).next_u64()
}

pub(crate) fn load_dataset(path: &Path) -> CliResult<OmicsDataset> {
    Ok(load_dataset_cache(path)?)
}

pub(crate) fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub(crate) fn write(path: &Path, text: &str) -> CliResult<()> {
    Ok(write_text(path, text)?)
}

/// Keep the requested modalities that the dataset actually has.
pub(crate) fn restrict_modalities(ds: &OmicsDataset, expression: bool, methylation: bool) -> CliResult<OmicsDataset> {
    let keep_e = expression && ds.expression.is_some();
    let keep_m = methylation && !ds.methylation.is_empty();
    if !keep_e && !keep_m {
        return Err(CliError::validation("no requested modality is present in the dataset"));
    }
    Ok(ds.with_modalities(keep_e, keep_m)?)
}

/// Stratified fold round `fold` of `k`. Unlabeled data is dealt as a single class.
pub(crate) fn fold_round(ds: &OmicsDataset, k: usize, fold: usize, seed: u64) -> CliResult<FoldRound> {
    if fold >= k {
        return Err(CliError::validation(format!("split.fold = {fold} must be below split.k = {k}")));
    }
    let unlabeled;
    let labels = match &ds.labels {
        Some(l) => l.as_slice(),
        None => {
            unlabeled = vec![0; ds.len()];
            &unlabeled
        }
    };
    Ok(stratified_kfold(labels, k, seed)?.round(fold))
}

pub(crate) fn split_tsv(ds: &OmicsDataset, round: &FoldRound) -> String {
    let mut role = vec![""; ds.len()];
    for (name, rows) in [("train", &round.train), ("validation", &round.validation), ("test", &round.test)] {
        for &r in rows {
            role[r] = name;
        }
    }
    let mut out = String::from("sample_id\trole\n");
    for (id, r) in ds.sample_ids.iter().zip(role) {
        let _ = writeln!(out, "{id}\t{r}");
    }
    out
}

/// Rows of `ds` whose sample carries `role` in a split file written by `train`.
pub(crate) fn rows_with_role(ds: &OmicsDataset, split: &Path, role: &str) -> CliResult<Vec<usize>> {
    let text = std::fs::read_to_string(split).map_err(|e| CliError::Runtime(format!("{}: {e}", split.display())))?;
    let mut roles: HashMap<&str, &str> = HashMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (id, r) = line.split_once('\t').ok_or_else(|| {
            CliError::validation(format!("{}: line {}: expected sample_id and role", split.display(), i + 1))
        })?;
        roles.insert(id, r.trim());
    }
    let rows: Vec<usize> = (0..ds.len())
        .filter(|&i| roles.get(ds.sample_ids[i].as_str()) == Some(&role))
        .collect();
    if rows.is_empty() {
        return Err(CliError::validation(format!("no dataset sample has role `{role}` in {}", split.display())));
    }
    Ok(rows)
}

/// Run facts stored next to the weights.
pub(crate) struct RunMeta {
    pub phase: String,
    pub classes: Vec<String>,
    pub scaler: Option<MinMaxScaler>,
    pub master_seed: u64,
    pub k: usize,
    pub fold: usize,
}

impl RunMeta {
    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("phase", &self.phase);
        doc.set("data.classes", self.classes.join("\t"));
        doc.set("train.master_seed", self.master_seed);
        doc.set("split.k", self.k);
        doc.set("split.fold", self.fold);
        if let Some(s) = &self.scaler {
            doc.set_list("scaler.min", &s.min);
            doc.set_list("scaler.max", &s.max);
        }
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> CliResult<Self> {
        let scaler = if doc.contains("scaler.min") {
            Some(MinMaxScaler {
                min: doc.get_list("scaler.min")?,
                max: doc.get_list("scaler.max")?,
            })
        } else {
            None
        };
        let classes = doc.get_str("data.classes").unwrap_or_default();
        Ok(RunMeta {
            phase: doc.get("phase")?,
            classes: if classes.is_empty() {
                Vec::new()
            } else {
                classes.split('\t').map(str::to_string).collect()
            },
            scaler,
            master_seed: doc.get("train.master_seed")?,
            k: doc.get("split.k")?,
            fold: doc.get("split.fold")?,
        })
    }
}

/// Put a dataset into the shape a trained model expects: same modalities,
/// matching widths, the training scaler, and labels in the model's class order.
pub(crate) fn conform(ds: &OmicsDataset, model: &OmiVaeModel, meta: &RunMeta) -> CliResult<OmicsDataset> {
    let c = model.config();
    let mut ds = restrict_modalities(ds, c.use_expression, c.use_methylation)?;
    let dims = ds.methyl_block_dims();
    if (c.use_expression && ds.expr_dim() != c.expr_dim) || (c.use_methylation && dims != c.methyl_block_dims) {
        return Err(CliError::validation(format!(
            "dataset layout (methylation {dims:?}, expression {}) does not match the model (methylation {:?}, expression {})",
            ds.expr_dim(),
            c.methyl_block_dims,
            c.expr_dim
        )));
    }
    if let Some(s) = &meta.scaler {
        ds = ds.apply_expression_scaler(s)?;
    }
    if let Some(labels) = &ds.labels {
        if !meta.classes.is_empty() {
            let index: HashMap<&str, usize> = meta.classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
            let mapped = labels
                .iter()
                .map(|&l| {
                    let name = &ds.class_vocab[l];
                    index
                        .get(name.as_str())
                        .copied()
                        .ok_or_else(|| CliError::validation(format!("class `{name}` is unknown to the model")))
                })
                .collect::<CliResult<Vec<usize>>>()?;
            ds.labels = Some(mapped);
            ds.class_vocab = meta.classes.clone();
        }
    }
    Ok(ds)
}

pub(crate) fn load_run(path: &Path) -> CliResult<(Checkpoint, RunMeta)> {
    let ckpt = omivae_core::optim::load_checkpoint(path)?;
    let meta = RunMeta::from_kv(&ckpt.metadata)?;
    Ok((ckpt, meta))
}

pub(crate) fn threads() -> CliResult<usize> {
    match std::env::var("OMIVAE_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::validation(format!("OMIVAE_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}
