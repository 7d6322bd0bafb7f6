use std::path::Path;

use omivae_core::eval::{compute_metrics, embed_dataset, render_scatter, Embedding};

use super::{conform, load_dataset, load_run, rows_with_role, write};
use crate::error::{CliError, CliResult};

/// Which rows of the dataset a command looks at.
#[derive(Clone, Copy, Debug)]
pub struct RowFilter<'a> {
    pub split: Option<&'a Path>,
    pub role: &'a str,
}

fn load_conformed(checkpoint: &Path, data: &Path, rows: RowFilter<'_>) -> CliResult<(omivae_core::OmiVaeModel, omivae_core::OmicsDataset)> {
    let (ckpt, meta) = load_run(checkpoint)?;
    let mut ds = load_dataset(data)?;
    if let Some(split) = rows.split {
        ds = ds.select(&rows_with_role(&ds, split, rows.role)?);
    }
    let ds = conform(&ds, &ckpt.model, &meta)?;
    Ok((ckpt.model, ds))
}

/// Latent means of every selected sample as an embedding TSV.
pub fn cmd_embed(checkpoint: &Path, data: &Path, rows: RowFilter<'_>, out: &Path) -> CliResult<()> {
    let (model, ds) = load_conformed(checkpoint, data, rows)?;
    let embedding = embed_dataset(&model, &ds)?;
    embedding.save(out)?;
    println!("samples\t{}\ndims\t{}", embedding.values.rows(), embedding.dims());
    Ok(())
}

/// Classification report for the selected samples.
pub fn cmd_evaluate(checkpoint: &Path, data: &Path, rows: RowFilter<'_>, out: Option<&Path>) -> CliResult<()> {
    let (model, ds) = load_conformed(checkpoint, data, rows)?;
    let truth = ds.labels.as_deref().ok_or_else(|| CliError::validation("evaluation needs labels"))?;
    let pred = model.predict(&ds.model_input())?;
    let report = compute_metrics(truth, &pred, model.config().num_classes)?;
    let text = report.to_text(&ds.class_vocab);
    if let Some(path) = out {
        write(path, &text)?;
        write(&path.with_extension("confusion.tsv"), &report.confusion_tsv(&ds.class_vocab))?;
    }
    print!("{text}");
    Ok(())
}

/// SVG scatter of the first two embedding dimensions.
pub fn cmd_plot(embedding: &Path, out: &Path, title: Option<&str>) -> CliResult<()> {
    let e = Embedding::load(embedding)?;
    let default_title = embedding.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let svg = render_scatter(&e, title.unwrap_or(&default_title))?;
    write(out, &svg)
}
