use std::path::{Path, PathBuf};

use omivae_core::data::{
    labels_to_tsv, load_labels, load_matrix_tsv, preprocess, save_dataset_cache, synthesize, FeatureAnnotation,
    RawOmics,
};

use super::{create_dir, write};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Generate a synthetic corpus: raw TSVs plus the preprocessed dataset cache.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let spec = cfg.synthetic_spec()?;
    let data = synthesize(&spec)?;
    let (dataset, report) = preprocess(&data.raw(), &cfg.preprocess_config()?)?;
    create_dir(out)?;
    let orientation = cfg.orientation();
    if let Some(e) = &data.expression {
        write(&out.join("expression.tsv"), &e.to_tsv(orientation))?;
    }
    if let Some(m) = &data.methylation {
        write(&out.join("methylation.tsv"), &m.to_tsv(orientation))?;
    }
    write(&out.join("annotation.tsv"), &data.annotation.to_tsv())?;
    write(&out.join("labels.tsv"), &labels_to_tsv(&data.labels))?;
    write(&out.join("preprocess_report.tsv"), &report.to_text())?;
    save_dataset_cache(&out.join("dataset.omids"), &dataset)?;
    println!(
        "samples\t{}\nclasses\t{}\nexpression_features\t{}\nmethylation_blocks\t{}",
        dataset.len(),
        dataset.num_classes(),
        dataset.expr_dim(),
        dataset.methylation.len()
    );
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct PreprocessInputs {
    pub expression: Option<PathBuf>,
    pub methylation: Option<PathBuf>,
    pub annotation: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

/// Filter, impute, scale and group raw TSVs into a dataset cache.
/// Paths given on the command line win over `data.*` configuration keys.
pub fn cmd_preprocess(cfg: &RunConfig, inputs: &PreprocessInputs, out: &Path, report: Option<&Path>) -> CliResult<()> {
    let pick = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| cfg.path(key).map(PathBuf::from));
    let expression = pick(&inputs.expression, "data.expression");
    let methylation = pick(&inputs.methylation, "data.methylation");
    let annotation = pick(&inputs.annotation, "data.annotation");
    let labels = pick(&inputs.labels, "data.labels");
    if expression.is_none() && methylation.is_none() {
        return Err(CliError::validation("give at least one of --expression and --methylation"));
    }
    if methylation.is_some() && annotation.is_none() {
        return Err(CliError::validation("methylation input needs --annotation to map probes to chromosomes"));
    }
    let orientation = cfg.orientation();
    let raw = RawOmics {
        expression: expression.map(|p| load_matrix_tsv(&p, orientation)).transpose()?,
        methylation: methylation.map(|p| load_matrix_tsv(&p, orientation)).transpose()?,
        annotation: annotation.map(|p| FeatureAnnotation::load(&p)).transpose()?.unwrap_or_default(),
        labels: labels.map(|p| load_labels(&p)).transpose()?,
    };
    let (dataset, rep) = preprocess(&raw, &cfg.preprocess_config()?)?;
    save_dataset_cache(out, &dataset)?;
    let text = rep.to_text();
    if let Some(path) = report {
        write(path, &text)?;
    }
    print!("{text}");
    Ok(())
}
