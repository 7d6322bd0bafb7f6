//! Run configuration: flat dotted keys from a `key = value` file plus
//! `--set key=value` overrides, checked against a fixed schema.

use std::fmt::Write as _;
use std::path::Path;

use omivae_core::data::{Orientation, PreprocessConfig, SyntheticMode, SyntheticSpec};
use omivae_core::loss::{LossWeights, Reduction};
use omivae_core::optim::TrainConfig;
use omivae_core::{KvDoc, ModelConfig};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug)]
enum Kind {
    Count,
    /// Empty means "use the preset".
    OptCount,
    /// Comma-separated counts; empty means "use the preset".
    OptCounts,
    Seed,
    Real,
    Flag,
    Choice(&'static [&'static str]),
    Path,
}

struct Key {
    name: &'static str,
    default: &'static str,
    kind: Kind,
    help: &'static str,
}

const fn key(name: &'static str, default: &'static str, kind: Kind, help: &'static str) -> Key {
    Key {
        name,
        default,
        kind,
        help,
    }
}

const SCHEMA: &[Key] = &[
    key("model.preset", "small", Kind::Choice(&["small", "full"]), "width preset"),
    key("model.per_block_hidden", "", Kind::OptCount, "hidden width per chromosome block"),
    key("model.expr_hidden", "", Kind::OptCount, "first hidden width of the expression encoder"),
    key("model.modality_dim", "", Kind::OptCount, "width of each modality representation"),
    key("model.fusion_dim", "", Kind::OptCount, "width of the fused representation"),
    key("model.latent_dim", "", Kind::OptCount, "latent dimension"),
    key("model.classifier_hidden", "", Kind::OptCounts, "classifier hidden widths"),
    key("model.use_expression", "true", Kind::Flag, "feed gene expression"),
    key("model.use_methylation", "true", Kind::Flag, "feed DNA methylation"),
    key("model.recon_reduction", "sum", Kind::Choice(&["sum", "mean"]), "BCE reduction over features"),
    key("train.batch_size", "32", Kind::Count, "mini-batch size"),
    key("train.lr", "0.001", Kind::Real, "Adam learning rate"),
    key("train.master_seed", "0", Kind::Seed, "seed for initialization, shuffling, sampling and folds"),
    key("train.shuffle", "true", Kind::Flag, "reshuffle every epoch"),
    key("train.phase1.epochs_max", "200", Kind::Count, "unsupervised epoch cap"),
    key("train.phase1.patience", "10", Kind::Count, "unsupervised early-stopping patience"),
    key("train.phase1.min_delta", "0", Kind::Real, "unsupervised minimum improvement"),
    key("train.phase1.alpha", "1", Kind::Real, "unsupervised reconstruction weight"),
    key("train.phase2.epochs_max", "300", Kind::Count, "supervised epoch cap"),
    key("train.phase2.patience", "10", Kind::Count, "supervised early-stopping patience"),
    key("train.phase2.min_delta", "0", Kind::Real, "supervised minimum improvement"),
    key("train.phase2.alpha", "1", Kind::Real, "supervised reconstruction weight"),
    key("train.phase2.beta", "1", Kind::Real, "supervised classification weight"),
    key("split.k", "10", Kind::Count, "stratified folds"),
    key("split.fold", "0", Kind::Count, "test fold for `train`; the next fold validates"),
    key("preprocess.missing_fraction_threshold", "0.1", Kind::Real, "drop features missing in more than this fraction"),
    key("preprocess.drop_y_chromosome", "true", Kind::Flag, "drop Y-chromosome features"),
    key("preprocess.drop_all_zero", "true", Kind::Flag, "drop all-zero expression features"),
    key("preprocess.drop_unmapped_and_control", "true", Kind::Flag, "drop unmapped methylation probes"),
    key("preprocess.normalize_expression", "true", Kind::Flag, "min-max scale expression to [0, 1]"),
    key("preprocess.log2_expression", "false", Kind::Flag, "apply log2(x + 1) to expression first"),
    key("data.expression", "", Kind::Path, "expression TSV"),
    key("data.methylation", "", Kind::Path, "methylation TSV"),
    key("data.annotation", "", Kind::Path, "probe/gene to chromosome TSV"),
    key("data.labels", "", Kind::Path, "sample to class TSV"),
    key(
        "data.orientation",
        "features-by-rows",
        Kind::Choice(&["features-by-rows", "samples-by-rows"]),
        "matrix TSV layout",
    ),
    key("synth.num_classes", "10", Kind::Count, "classes"),
    key("synth.samples_per_class", "60", Kind::Count, "samples per class"),
    key("synth.num_blocks", "5", Kind::Count, "methylation chromosome blocks"),
    key("synth.features_per_block", "200", Kind::Count, "methylation features per block"),
    key("synth.expr_features", "400", Kind::Count, "expression features"),
    key("synth.class_signal", "0.2", Kind::Real, "class effect size"),
    key("synth.informative_fraction", "0.2", Kind::Real, "fraction of features carrying class signal"),
    key("synth.mode", "offsets", Kind::Choice(&["offsets", "split", "nonlinear"]), "class signal layout"),
    key("synth.latent_jitter", "0.01", Kind::Real, "within-class spread of the nonlinear latent"),
    key("synth.noise_sd", "0.1", Kind::Real, "Gaussian measurement noise"),
    key("synth.missing_rate", "0", Kind::Real, "fraction of cells blanked"),
    key("synth.seed", "1", Kind::Seed, "generator seed"),
];

fn lookup(name: &str) -> Option<&'static Key> {
    SCHEMA.iter().find(|k| k.name == name)
}

fn check(k: &Key, value: &str) -> CliResult<()> {
    let bad = |what: &str| Err(CliError::validation(format!("`{}` expects {what}, got `{value}`", k.name)));
    match k.kind {
        Kind::Count => value.parse::<usize>().map(drop).or_else(|_| bad("a non-negative integer")),
        Kind::OptCount if value.is_empty() => Ok(()),
        Kind::OptCount => value.parse::<usize>().map(drop).or_else(|_| bad("a non-negative integer or nothing")),
        Kind::OptCounts if value.is_empty() => Ok(()),
        Kind::OptCounts => match value.split(',').all(|p| p.trim().parse::<usize>().is_ok()) {
            true => Ok(()),
            false => bad("comma-separated integers"),
        },
        Kind::Seed => value.parse::<u64>().map(drop).or_else(|_| bad("an unsigned 64-bit integer")),
        Kind::Real => match value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(()),
            _ => bad("a finite number"),
        },
        Kind::Flag => match value {
            "true" | "false" => Ok(()),
            _ => bad("true or false"),
        },
        Kind::Choice(options) if options.contains(&value) => Ok(()),
        Kind::Choice(options) => bad(&format!("one of {}", options.join(", "))),
        Kind::Path => Ok(()),
    }
}

/// Merged, validated configuration for every subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    doc: KvDoc,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut doc = KvDoc::new();
        for k in SCHEMA {
            doc.set(k.name, k.default);
        }
        RunConfig { doc }
    }
}

impl RunConfig {
    /// Defaults, then the file (if any), then `key=value` overrides in order.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            let doc = KvDoc::parse(&text, &path.display().to_string())?;
            for name in doc.keys() {
                cfg.set(name, doc.get_str(name).unwrap_or_default())?;
            }
        }
        for item in overrides {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::validation(format!("--set expects key=value, got `{item}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, name: &str, value: &str) -> CliResult<()> {
        let k = lookup(name).ok_or_else(|| CliError::validation(format!("unknown configuration key `{name}`")))?;
        check(k, value)?;
        self.doc.set(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> &str {
        debug_assert!(lookup(name).is_some(), "{name} is not in the schema");
        self.doc.get_str(name).unwrap_or_default()
    }

    // Values were checked on the way in, so the parses below cannot fail.
    fn count(&self, name: &str) -> usize {
        self.get(name).parse().unwrap_or_default()
    }

    fn opt_count(&self, name: &str) -> Option<usize> {
        self.get(name).parse().ok()
    }

    fn real(&self, name: &str) -> f64 {
        self.get(name).parse().unwrap_or_default()
    }

    fn flag(&self, name: &str) -> bool {
        self.get(name) == "true"
    }

    fn seed(&self, name: &str) -> u64 {
        self.get(name).parse().unwrap_or_default()
    }

    pub fn path(&self, name: &str) -> Option<&str> {
        Some(self.get(name)).filter(|p| !p.is_empty())
    }

    /// Canonical text of every key, in schema order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for k in SCHEMA {
            let _ = writeln!(out, "{} = {}", k.name, self.get(k.name));
        }
        out
    }

    /// Schema reference: key, default and a short description per line.
    pub fn schema_text() -> String {
        let mut out = String::new();
        for k in SCHEMA {
            let default = if k.default.is_empty() { "(preset)" } else { k.default };
            let _ = writeln!(out, "{:<40} {:<18} {}", k.name, default, k.help);
        }
        out
    }

    pub fn master_seed(&self) -> u64 {
        self.seed("train.master_seed")
    }

    pub fn folds(&self) -> usize {
        self.count("split.k")
    }

    pub fn test_fold(&self) -> usize {
        self.count("split.fold")
    }

    /// Requested modalities as `(expression, methylation)`.
    pub fn modalities(&self) -> (bool, bool) {
        (self.flag("model.use_expression"), self.flag("model.use_methylation"))
    }

    pub fn model_config(&self, methyl_block_dims: Vec<usize>, expr_dim: usize, num_classes: usize) -> CliResult<ModelConfig> {
        let mut c = match self.get("model.preset") {
            "full" => ModelConfig::full_scale(methyl_block_dims, expr_dim, num_classes),
            _ => ModelConfig::small(methyl_block_dims, expr_dim, num_classes),
        };
        let widths = [
            ("model.per_block_hidden", &mut c.per_block_hidden),
            ("model.expr_hidden", &mut c.expr_hidden),
            ("model.modality_dim", &mut c.modality_dim),
            ("model.fusion_dim", &mut c.fusion_dim),
            ("model.latent_dim", &mut c.latent_dim),
        ];
        for (name, slot) in widths {
            if let Some(v) = self.opt_count(name) {
                *slot = v;
            }
        }
        let hidden = self.get("model.classifier_hidden");
        if !hidden.is_empty() {
            c.classifier_hidden = hidden.split(',').filter_map(|p| p.trim().parse().ok()).collect();
        }
        c.recon_reduction = Reduction::parse(self.get("model.recon_reduction")).unwrap_or_default();
        c.validate()?;
        Ok(c)
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let mut t = TrainConfig {
            batch_size: self.count("train.batch_size"),
            lr: self.real("train.lr"),
            master_seed: self.master_seed(),
            shuffle: self.flag("train.shuffle"),
            ..TrainConfig::default()
        };
        t.unsupervised.epochs_max = self.count("train.phase1.epochs_max");
        t.unsupervised.patience = self.count("train.phase1.patience");
        t.unsupervised.min_delta = self.real("train.phase1.min_delta");
        t.unsupervised.weights = LossWeights::new(self.real("train.phase1.alpha"), 0.0)?;
        t.supervised.epochs_max = self.count("train.phase2.epochs_max");
        t.supervised.patience = self.count("train.phase2.patience");
        t.supervised.min_delta = self.real("train.phase2.min_delta");
        t.supervised.weights = LossWeights::new(self.real("train.phase2.alpha"), self.real("train.phase2.beta"))?;
        t.validate()?;
        Ok(t)
    }

    pub fn preprocess_config(&self) -> CliResult<PreprocessConfig> {
        let p = PreprocessConfig {
            missing_fraction_threshold: self.real("preprocess.missing_fraction_threshold"),
            drop_y_chromosome: self.flag("preprocess.drop_y_chromosome"),
            drop_all_zero: self.flag("preprocess.drop_all_zero"),
            drop_unmapped_and_control: self.flag("preprocess.drop_unmapped_and_control"),
            normalize_expression_to_unit_interval: self.flag("preprocess.normalize_expression"),
            log2_expression: self.flag("preprocess.log2_expression"),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn orientation(&self) -> Orientation {
        match self.get("data.orientation") {
            "samples-by-rows" => Orientation::SamplesByRows,
            _ => Orientation::FeaturesByRows,
        }
    }

    pub fn synthetic_spec(&self) -> CliResult<SyntheticSpec> {
        let spec = SyntheticSpec {
            num_classes: self.count("synth.num_classes"),
            samples_per_class: self.count("synth.samples_per_class"),
            num_blocks: self.count("synth.num_blocks"),
            features_per_block: self.count("synth.features_per_block"),
            expr_features: self.count("synth.expr_features"),
            class_signal: self.real("synth.class_signal"),
            informative_fraction: self.real("synth.informative_fraction"),
            mode: SyntheticMode::parse(self.get("synth.mode")).unwrap_or(SyntheticMode::Offsets),
            latent_jitter: self.real("synth.latent_jitter"),
            noise_sd: self.real("synth.noise_sd"),
            missing_rate: self.real("synth.missing_rate"),
            seed: self.seed("synth.seed"),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library_defaults() {
        let cfg = RunConfig::default();
        let t = cfg.train_config().unwrap();
        assert_eq!(t, TrainConfig::default());
        assert_eq!(cfg.preprocess_config().unwrap(), PreprocessConfig::default());
        assert_eq!(cfg.synthetic_spec().unwrap(), SyntheticSpec::default());
        assert_eq!(cfg.model_config(vec![5, 6], 7, 3).unwrap(), ModelConfig::small(vec![5, 6], 7, 3));
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nmodel.latent_dim = 2\ntrain.lr = 0.01\n").unwrap();
        let cfg = RunConfig::load(Some(&path), &["train.lr=0.5".into(), "model.classifier_hidden=4,3".into()]).unwrap();
        let m = cfg.model_config(vec![5], 0, 2).unwrap();
        assert_eq!(m.latent_dim, 2);
        assert_eq!(m.classifier_hidden, vec![4, 3]);
        assert_eq!(cfg.train_config().unwrap().lr, 0.5);
        let again = RunConfig::load(None, &cfg.render().lines().map(str::to_string).collect::<Vec<_>>()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        for bad in ["model.latent = 2", "train.lr=abc", "train.shuffle=yes", "synth.mode=spiral", "split.k=-1", "nokey"] {
            let err = RunConfig::load(None, &[bad.to_string()]).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad}");
        }
        let cfg = RunConfig::load(None, &["train.batch_size=1".into()]).unwrap();
        assert!(cfg.train_config().is_err());
    }

    #[test]
    fn schema_defaults_are_valid() {
        for k in SCHEMA {
            check(k, k.default).unwrap();
        }
        assert!(RunConfig::schema_text().lines().count() == SCHEMA.len());
    }
}
