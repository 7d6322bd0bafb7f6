//! Binary cache of a preprocessed dataset.
//!
//! Layout (little endian): magic `OMIDS1`, version u32, header text
//! (`key = value` lines), sample IDs, class vocabulary and expression feature
//! IDs as newline-joined length-prefixed text, tensor count u32, tensors
//! (`labels`, `expression`, `methyl.<chromosome>`), then one newline-joined
//! feature ID text per methylation block.

use std::path::Path;

use super::{Chromosome, MethylationBlock, OmicsDataset};
use crate::binio::{read_file, write_atomic, Reader, Writer};
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::numerics::Matrix;

pub const DATASET_MAGIC: &[u8; 6] = b"OMIDS1";
pub const DATASET_VERSION: u32 = 1;

fn join(ids: &[String]) -> String {
    ids.join("\n")
}

fn split(text: &str) -> Vec<String> {
    if text.is_empty() {
        Vec::new()
    } else {
        text.split('\n').map(str::to_string).collect()
    }
}

pub fn encode_dataset(ds: &OmicsDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let mut header = KvDoc::new();
    header.set("samples", ds.len());
    header.set("has_expression", ds.expression.is_some());
    header.set("has_labels", ds.labels.is_some());
    let chrs: Vec<String> = ds.methylation.iter().map(|b| b.chromosome.name()).collect();
    header.set("blocks", chrs.join(","));

    let mut w = Writer::new();
    w.bytes(DATASET_MAGIC);
    w.u32(DATASET_VERSION);
    w.text(&header.render())?;
    w.text(&join(&ds.sample_ids))?;
    w.text(&join(&ds.class_vocab))?;
    w.text(&join(&ds.expr_feature_ids))?;

    let n = ds.len();
    let count = usize::from(ds.labels.is_some()) + usize::from(ds.expression.is_some()) + ds.methylation.len();
    w.len(count)?;
    if let Some(l) = &ds.labels {
        let v: Vec<f64> = l.iter().map(|&c| c as f64).collect();
        w.tensor("labels", &[n], &v)?;
    }
    if let Some(e) = &ds.expression {
        w.tensor("expression", &[e.rows(), e.cols()], e.data())?;
    }
    for b in &ds.methylation {
        let name = format!("methyl.{}", b.chromosome.name());
        w.tensor(&name, &[b.values.rows(), b.values.cols()], b.values.data())?;
    }
    for b in &ds.methylation {
        w.text(&join(&b.feature_ids))?;
    }
    Ok(w.finish())
}

fn matrix(r: &mut Reader<'_>, name: &str) -> Result<Matrix> {
    let t = r.tensor()?;
    if t.name != name || t.dims.len() != 2 {
        return Err(Error::Format(format!("expected matrix `{name}`, found `{}`", t.name)));
    }
    Matrix::new(t.dims[0], t.dims[1], t.values)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<OmicsDataset> {
    let mut r = Reader::new(bytes);
    r.expect_magic(DATASET_MAGIC)?;
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset cache version {version}")));
    }
    let header = KvDoc::parse(&r.text()?, "dataset cache header")?;
    let sample_ids = split(&r.text()?);
    let class_vocab = split(&r.text()?);
    let expr_feature_ids = split(&r.text()?);
    let has_labels: bool = header.get("has_labels")?;
    let has_expr: bool = header.get("has_expression")?;
    let chromosomes = split(&header.get_str("blocks").unwrap_or_default().replace(',', "\n"))
        .iter()
        .map(|c| Chromosome::parse(c).ok_or_else(|| Error::Format(format!("bad chromosome `{c}`"))))
        .collect::<Result<Vec<_>>>()?;

    let count = r.len()?;
    let expected = usize::from(has_labels) + usize::from(has_expr) + chromosomes.len();
    if count != expected {
        return Err(Error::Format(format!("{count} tensors where {expected} were expected")));
    }
    let labels = if has_labels {
        let t = r.tensor()?;
        if t.name != "labels" {
            return Err(Error::Format(format!("expected `labels`, found `{}`", t.name)));
        }
        Some(t.values.iter().map(|&v| v as usize).collect())
    } else {
        None
    };
    let expression = if has_expr { Some(matrix(&mut r, "expression")?) } else { None };
    let mut values = Vec::new();
    for c in &chromosomes {
        values.push(matrix(&mut r, &format!("methyl.{}", c.name()))?);
    }
    let mut methylation = Vec::new();
    for (chromosome, values) in chromosomes.into_iter().zip(values) {
        methylation.push(MethylationBlock {
            chromosome,
            feature_ids: split(&r.text()?),
            values,
        });
    }
    if !r.at_end() {
        return Err(Error::Format("trailing bytes in dataset cache".into()));
    }
    let ds = OmicsDataset {
        sample_ids,
        expression,
        expr_feature_ids,
        methylation,
        labels,
        class_vocab,
    };
    ds.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(ds)
}

pub fn save_dataset_cache(path: &Path, ds: &OmicsDataset) -> Result<()> {
    write_atomic(path, &encode_dataset(ds)?)
}

pub fn load_dataset_cache(path: &Path) -> Result<OmicsDataset> {
    decode_dataset(&read_file(path)?)
}
