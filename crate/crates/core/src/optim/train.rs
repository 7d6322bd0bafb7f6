//! Two-phase training: an unsupervised phase on the VAE objective alone,
//! then a supervised phase that attaches the classification term. Each phase
//! runs mini-batch Adam with early stopping and restores its best snapshot.

use super::AdamState;
use crate::error::{Error, Result};
use crate::layers::Parameterized;
use crate::loss::{LossReport, LossWeights};
use crate::model::{ModelInput, OmiVaeModel};
use crate::numerics::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Unsupervised,
    Supervised,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Unsupervised => "unsupervised",
            Phase::Supervised => "supervised",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "unsupervised" => Some(Phase::Unsupervised),
            "supervised" => Some(Phase::Supervised),
            _ => None,
        }
    }

    fn stream(self) -> u64 {
        match self {
            Phase::Unsupervised => 1,
            Phase::Supervised => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConfig {
    /// Zero skips the phase.
    pub epochs_max: usize,
    pub weights: LossWeights,
    /// Epochs without improvement before stopping.
    pub patience: usize,
    pub min_delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub unsupervised: PhaseConfig,
    pub supervised: PhaseConfig,
    pub master_seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            lr: 1e-3,
            unsupervised: PhaseConfig {
                epochs_max: 200,
                weights: LossWeights::unsupervised(),
                patience: 10,
                min_delta: 0.0,
            },
            supervised: PhaseConfig {
                epochs_max: 300,
                weights: LossWeights::supervised(),
                patience: 10,
                min_delta: 0.0,
            },
            master_seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn phase(&self, phase: Phase) -> &PhaseConfig {
        match phase {
            Phase::Unsupervised => &self.unsupervised,
            Phase::Supervised => &self.supervised,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be at least 2 for batch normalization, got {}",
                self.batch_size
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        for p in [&self.unsupervised, &self.supervised] {
            if p.patience < 1 {
                return Err(Error::Config("patience must be at least 1".into()));
            }
            if !(p.min_delta >= 0.0) {
                return Err(Error::Config("min_delta must be non-negative".into()));
            }
            LossWeights::new(p.weights.alpha, p.weights.beta)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub input: ModelInput,
    pub labels: Option<Vec<usize>>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.input.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct TrainData {
    pub train: LabeledSet,
    pub validation: LabeledSet,
    /// Extra samples without labels, used only by the unsupervised phase.
    pub unlabeled: Option<ModelInput>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based within the phase.
    pub epoch: usize,
    pub phase: Phase,
    /// Sample-weighted mean over the epoch's mini-batches.
    pub train: LossReport,
    pub validation: LossReport,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSummary {
    pub phase: Phase,
    /// 0 when the phase did not run.
    pub best_epoch: usize,
    pub best_metric: f64,
    pub epochs_run: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
    pub phases: Vec<PhaseSummary>,
}

pub const HISTORY_COLUMNS: [&str; 15] = [
    "epoch",
    "phase",
    "train_total",
    "train_vae",
    "train_recon_methyl",
    "train_recon_expr",
    "train_kl",
    "train_classification",
    "val_total",
    "val_vae",
    "val_recon_methyl",
    "val_recon_expr",
    "val_kl",
    "val_classification",
    "val_accuracy",
];

impl History {
    pub fn phase_records(&self, phase: Phase) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    /// One row per epoch; `val_accuracy` is `NA` in the unsupervised phase.
    pub fn to_tsv(&self) -> String {
        let mut out = HISTORY_COLUMNS.join("\t");
        out.push('\n');
        for r in &self.records {
            let acc = r.val_accuracy.map_or_else(|| "NA".to_string(), |a| a.to_string());
            let cells = [
                r.epoch.to_string(),
                r.phase.name().to_string(),
                r.train.total.to_string(),
                r.train.vae.to_string(),
                r.train.recon_methyl.to_string(),
                r.train.recon_expr.to_string(),
                r.train.kl.to_string(),
                r.train.classification.to_string(),
                r.validation.total.to_string(),
                r.validation.vae.to_string(),
                r.validation.recon_methyl.to_string(),
                r.validation.recon_expr.to_string(),
                r.validation.kl.to_string(),
                r.validation.classification.to_string(),
                acc,
            ];
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Mini-batches of row indices; a trailing batch smaller than 2 is dropped.
pub fn batch_indices(n: usize, batch_size: usize, shuffle: bool, rng: &mut RngState) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        rng.shuffle(&mut order);
    }
    order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(<[usize]>::to_vec)
        .collect()
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

fn accumulate(acc: &mut LossReport, r: &LossReport, w: f64) {
    acc.recon_methyl += w * r.recon_methyl;
    acc.recon_expr += w * r.recon_expr;
    acc.kl += w * r.kl;
    acc.vae += w * r.vae;
    acc.classification += w * r.classification;
    acc.total += w * r.total;
}

/// Validation metric of a phase and whether larger is better.
fn validation_metric(
    model: &OmiVaeModel,
    validation: &LabeledSet,
    phase: Phase,
    weights: LossWeights,
) -> Result<(LossReport, Option<f64>, f64)> {
    let labels = match phase {
        Phase::Supervised => validation.labels.as_deref(),
        Phase::Unsupervised => None,
    };
    let (report, _) = model.evaluate_loss(&validation.input, labels, weights)?;
    match phase {
        Phase::Unsupervised => Ok((report, None, report.vae)),
        Phase::Supervised => {
            let truth = labels.ok_or_else(|| Error::Label("validation labels required".into()))?;
            let acc = accuracy(&model.predict(&validation.input)?, truth);
            Ok((report, Some(acc), acc))
        }
    }
}

/// Run one phase with early stopping. On success the model holds the
/// best-metric snapshot; on divergence it is rolled back to that snapshot and
/// the error is returned.
pub fn train_phase(
    model: &mut OmiVaeModel,
    data: &TrainData,
    config: &TrainConfig,
    phase: Phase,
) -> Result<(Vec<EpochRecord>, PhaseSummary)> {
    config.validate()?;
    let pc = config.phase(phase);
    let mut summary = PhaseSummary {
        phase,
        best_epoch: 0,
        best_metric: f64::NAN,
        epochs_run: 0,
    };
    if pc.epochs_max == 0 {
        return Ok((Vec::new(), summary));
    }
    if data.validation.is_empty() {
        return Err(Error::Empty("validation split".into()));
    }

    let supervised_input;
    let (input, labels): (&ModelInput, Option<&[usize]>) = match phase {
        Phase::Unsupervised => match &data.unlabeled {
            Some(extra) => {
                supervised_input = ModelInput::concat(&[&data.train.input, extra])?;
                (&supervised_input, None)
            }
            None => (&data.train.input, None),
        },
        Phase::Supervised => {
            let labels = data
                .train
                .labels
                .as_deref()
                .ok_or_else(|| Error::Label("supervised phase needs training labels".into()))?;
            if data.validation.labels.is_none() {
                return Err(Error::Label("supervised phase needs validation labels".into()));
            }
            (&data.train.input, Some(labels))
        }
    };
    if input.rows() < 2 {
        return Err(Error::Empty("training split has fewer than 2 samples".into()));
    }

    let maximize = phase == Phase::Supervised;
    let phase_rng = RngState::new(config.master_seed).derive(phase.stream());
    let mut adam = AdamState::new(config.lr);
    let mut best = model.clone();
    let mut records = Vec::new();
    let mut since_best = 0;
    // Accuracy on a small validation set plateaus in exact ties; a tie with a
    // lower validation classification loss still counts as progress.
    let mut best_tiebreak = f64::INFINITY;

    for epoch in 1..=pc.epochs_max {
        let epoch_rng = phase_rng.derive(epoch as u64);
        let batches = batch_indices(input.rows(), config.batch_size, config.shuffle, &mut epoch_rng.derive(0));
        let mut noise = epoch_rng.derive(1);
        let mut train = LossReport::default();
        let mut seen = 0usize;
        for idx in &batches {
            let batch = input.select_rows(idx);
            let batch_labels: Option<Vec<usize>> = labels.map(|l| idx.iter().map(|&i| l[i]).collect());
            model.zero_grad();
            let step = model
                .forward_backward(&batch, batch_labels.as_deref(), pc.weights, &mut noise)
                .and_then(|(_, report)| adam.step(model).map(|_| report));
            let report = match step {
                Ok(r) => r,
                Err(e) => {
                    *model = best;
                    return Err(e);
                }
            };
            accumulate(&mut train, &report, idx.len() as f64);
            seen += idx.len();
        }
        let inv = 1.0 / seen.max(1) as f64;
        let mut mean = LossReport::default();
        accumulate(&mut mean, &train, inv);

        let (validation, val_accuracy, metric) = match validation_metric(model, &data.validation, phase, pc.weights) {
            Ok(v) => v,
            Err(e) => {
                *model = best;
                return Err(e);
            }
        };
        records.push(EpochRecord {
            epoch,
            phase,
            train: mean,
            validation,
            val_accuracy,
        });
        summary.epochs_run = epoch;

        let tiebreak = records[records.len() - 1].validation.classification;
        let improved = summary.best_epoch == 0
            || if maximize {
                metric > summary.best_metric + pc.min_delta
                    || (metric == summary.best_metric && tiebreak < best_tiebreak)
            } else {
                metric < summary.best_metric - pc.min_delta
            };
        if improved {
            best_tiebreak = tiebreak;
            summary.best_epoch = epoch;
            summary.best_metric = metric;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= pc.patience {
                break;
            }
        }
    }
    *model = best;
    Ok((records, summary))
}

/// Unsupervised phase followed by the supervised phase; encoder and decoder
/// parameters carry over between them.
pub fn train_two_phase(model: &mut OmiVaeModel, data: &TrainData, config: &TrainConfig) -> Result<History> {
    let mut history = History::default();
    for phase in [Phase::Unsupervised, Phase::Supervised] {
        let (records, summary) = train_phase(model, data, config, phase)?;
        history.records.extend(records);
        history.phases.push(summary);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batching_drops_singleton_tail() {
        let mut rng = RngState::new(0);
        let b = batch_indices(65, 32, false, &mut rng);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0], (0..32).collect::<Vec<_>>());
        let b = batch_indices(66, 32, false, &mut rng);
        assert_eq!(b.len(), 3);
        assert_eq!(b[2], vec![64, 65]);
        let shuffled = batch_indices(66, 32, true, &mut rng);
        let mut all: Vec<usize> = shuffled.concat();
        assert_ne!(all, (0..66).collect::<Vec<_>>());
        all.sort_unstable();
        assert_eq!(all, (0..66).collect::<Vec<_>>());
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.batch_size = 1;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.supervised.patience = 0;
        assert!(c.validate().is_err());
    }
}
