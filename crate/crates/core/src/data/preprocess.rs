//! Feature filtering, imputation, scaling and chromosome grouping.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::tsv::{Chromosome, FeatureAnnotation, RawMatrix};
use super::{MethylationBlock, OmicsDataset};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    /// Features missing in strictly more than this fraction of samples are dropped.
    pub missing_fraction_threshold: f64,
    pub drop_y_chromosome: bool,
    pub drop_all_zero: bool,
    pub drop_unmapped_and_control: bool,
    pub normalize_expression_to_unit_interval: bool,
    /// Apply log2(x + 1) to expression before anything else.
    pub log2_expression: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            missing_fraction_threshold: 0.10,
            drop_y_chromosome: true,
            drop_all_zero: true,
            drop_unmapped_and_control: true,
            normalize_expression_to_unit_interval: true,
            log2_expression: false,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.missing_fraction_threshold) {
            return Err(Error::Config(format!(
                "missing_fraction_threshold must lie in [0, 1], got {}",
                self.missing_fraction_threshold
            )));
        }
        Ok(())
    }
}

/// Unprocessed inputs. Either modality may be absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawOmics {
    pub expression: Option<RawMatrix>,
    pub methylation: Option<RawMatrix>,
    pub annotation: FeatureAnnotation,
    pub labels: Option<Vec<(String, String)>>,
}

/// Per-rule removal counts for one modality.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModalityReport {
    pub input: usize,
    pub unmapped: usize,
    pub y_chromosome: usize,
    pub all_zero: usize,
    pub too_missing: usize,
    pub kept: usize,
    pub imputed_cells: usize,
}

impl ModalityReport {
    pub fn removed(&self) -> usize {
        self.input - self.kept
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreprocessReport {
    pub samples_input: usize,
    /// Present in only one of the two modality files.
    pub samples_unmatched: usize,
    /// Dropped because a label file was given but had no entry for them.
    pub samples_unlabeled: usize,
    pub samples_kept: usize,
    pub expression: Option<ModalityReport>,
    pub methylation: Option<ModalityReport>,
    /// Features per methylation block, in block order.
    pub blocks: Vec<(Chromosome, usize)>,
}

impl PreprocessReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "samples.input\t{}", self.samples_input);
        let _ = writeln!(out, "samples.unmatched\t{}", self.samples_unmatched);
        let _ = writeln!(out, "samples.unlabeled\t{}", self.samples_unlabeled);
        let _ = writeln!(out, "samples.kept\t{}", self.samples_kept);
        for (name, rep) in [("expression", &self.expression), ("methylation", &self.methylation)] {
            if let Some(r) = rep {
                for (key, v) in [
                    ("input", r.input),
                    ("removed.unmapped", r.unmapped),
                    ("removed.y_chromosome", r.y_chromosome),
                    ("removed.all_zero", r.all_zero),
                    ("removed.missing", r.too_missing),
                    ("kept", r.kept),
                    ("imputed_cells", r.imputed_cells),
                ] {
                    let _ = writeln!(out, "{name}.{key}\t{v}");
                }
            }
        }
        for (c, n) in &self.blocks {
            let _ = writeln!(out, "block.chr{}\t{n}", c.name());
        }
        out
    }
}

/// Per-feature min-max scaling to [0, 1]. Constant features map to 0.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Empty("min-max fit on zero rows".into()));
        }
        let mut min = vec![f64::INFINITY; x.cols()];
        let mut max = vec![f64::NEG_INFINITY; x.cols()];
        for i in 0..x.rows() {
            for (j, &v) in x.row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(MinMaxScaler { min, max })
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.min.len() {
            return Err(Error::shape(
                "min-max transform",
                format!("{} columns against {} fitted", x.cols(), self.min.len()),
            ));
        }
        Ok(Matrix::from_fn(x.rows(), x.cols(), |i, j| {
            let range = self.max[j] - self.min[j];
            if range > 0.0 {
                ((x.get(i, j) - self.min[j]) / range).clamp(0.0, 1.0)
            } else {
                0.0
            }
        }))
    }
}

/// Column indices kept by a predicate, counting the rejects.
fn retain(cols: &mut Vec<usize>, mut keep: impl FnMut(usize) -> bool) -> usize {
    let before = cols.len();
    cols.retain(|&c| keep(c));
    before - cols.len()
}

fn observed(raw: &RawMatrix, col: usize) -> impl Iterator<Item = f64> + '_ {
    (0..raw.samples())
        .filter(move |&i| !raw.is_missing(i, col))
        .map(move |i| raw.values.get(i, col))
}

/// Shared tail: missing-rate filter, then mean imputation of what remains.
fn filter_missing_and_impute(
    raw: &RawMatrix,
    cols: &mut Vec<usize>,
    threshold: f64,
    report: &mut ModalityReport,
) -> Result<Matrix> {
    let n = raw.samples();
    report.too_missing = retain(cols, |c| {
        let miss = (0..n).filter(|&i| raw.is_missing(i, c)).count();
        n == 0 || miss as f64 / n as f64 <= threshold
    });
    let mut out = raw.values.select_cols(cols);
    for (k, &c) in cols.iter().enumerate() {
        let (sum, count) = observed(raw, c).fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        for i in 0..n {
            if raw.is_missing(i, c) {
                out.set(i, k, mean);
                report.imputed_cells += 1;
            }
        }
    }
    report.kept = cols.len();
    Ok(out)
}

fn process_expression(
    raw: &RawMatrix,
    annotation: &FeatureAnnotation,
    config: &PreprocessConfig,
) -> Result<(Matrix, Vec<String>, ModalityReport)> {
    let raw = if config.log2_expression {
        let mut r = raw.clone();
        for v in r.values.data_mut() {
            if *v <= -1.0 {
                return Err(Error::Config("log2(x + 1) needs expression values above -1".into()));
            }
            *v = (*v + 1.0).log2();
        }
        r
    } else {
        raw.clone()
    };
    let mut report = ModalityReport {
        input: raw.features(),
        ..Default::default()
    };
    let mut cols: Vec<usize> = (0..raw.features()).collect();
    if config.drop_y_chromosome {
        report.y_chromosome = retain(&mut cols, |c| annotation.get(&raw.feature_ids[c]) != Some(Chromosome::Y));
    }
    if config.drop_all_zero {
        report.all_zero = retain(&mut cols, |c| {
            let mut seen = false;
            let all_zero = observed(&raw, c).all(|v| {
                seen = true;
                v == 0.0
            });
            !(seen && all_zero)
        });
    }
    let mut values = filter_missing_and_impute(&raw, &mut cols, config.missing_fraction_threshold, &mut report)?;
    if config.normalize_expression_to_unit_interval && values.rows() > 0 {
        values = MinMaxScaler::fit(&values)?.transform(&values)?;
    }
    let ids = cols.iter().map(|&c| raw.feature_ids[c].clone()).collect();
    Ok((values, ids, report))
}

fn process_methylation(
    raw: &RawMatrix,
    annotation: &FeatureAnnotation,
    config: &PreprocessConfig,
) -> Result<(Vec<MethylationBlock>, ModalityReport)> {
    let mut report = ModalityReport {
        input: raw.features(),
        ..Default::default()
    };
    let mut cols: Vec<usize> = (0..raw.features()).collect();
    if config.drop_unmapped_and_control {
        report.unmapped = retain(&mut cols, |c| annotation.get(&raw.feature_ids[c]).is_some());
    }
    if config.drop_y_chromosome {
        report.y_chromosome = retain(&mut cols, |c| annotation.get(&raw.feature_ids[c]) != Some(Chromosome::Y));
    }
    let values = filter_missing_and_impute(raw, &mut cols, config.missing_fraction_threshold, &mut report)?;

    let mut groups: BTreeMap<Chromosome, Vec<usize>> = BTreeMap::new();
    for (k, &c) in cols.iter().enumerate() {
        let chr = annotation.get(&raw.feature_ids[c]).ok_or_else(|| {
            Error::Config(format!(
                "methylation feature `{}` has no chromosome; enable unmapped filtering",
                raw.feature_ids[c]
            ))
        })?;
        if chr == Chromosome::Y {
            return Err(Error::Config(format!(
                "methylation feature `{}` targets chromosome Y; enable Y filtering",
                raw.feature_ids[c]
            )));
        }
        groups.entry(chr).or_default().push(k);
    }
    let blocks = groups
        .into_iter()
        .map(|(chromosome, ks)| MethylationBlock {
            chromosome,
            feature_ids: ks.iter().map(|&k| raw.feature_ids[cols[k]].clone()).collect(),
            values: values.select_cols(&ks),
        })
        .collect();
    Ok((blocks, report))
}

/// Filter, impute, scale and group. Samples are aligned across modalities in
/// the order of the expression file (or methylation when expression is absent).
pub fn preprocess(raw: &RawOmics, config: &PreprocessConfig) -> Result<(OmicsDataset, PreprocessReport)> {
    config.validate()?;
    let primary = raw
        .expression
        .as_ref()
        .or(raw.methylation.as_ref())
        .ok_or_else(|| Error::Empty("no input modality".into()))?;
    let mut report = PreprocessReport::default();

    let mut samples: Vec<String> = primary.sample_ids.clone();
    let mut all_ids: Vec<&String> = primary.sample_ids.iter().collect();
    if let (Some(e), Some(m)) = (&raw.expression, &raw.methylation) {
        let in_methyl: HashMap<&str, usize> = m.sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let in_expr: HashMap<&str, usize> = e.sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        samples.retain(|s| in_methyl.contains_key(s.as_str()));
        all_ids.extend(m.sample_ids.iter().filter(|s| !in_expr.contains_key(s.as_str())));
    }
    report.samples_input = all_ids.len();
    report.samples_unmatched = all_ids.len() - samples.len();

    let mut labels = None;
    let mut class_vocab = Vec::new();
    if let Some(pairs) = &raw.labels {
        let map: HashMap<&str, &str> = pairs.iter().map(|(s, c)| (s.as_str(), c.as_str())).collect();
        let before = samples.len();
        samples.retain(|s| map.contains_key(s.as_str()));
        report.samples_unlabeled = before - samples.len();
        let mut vocab: Vec<String> = samples.iter().map(|s| map[s.as_str()].to_string()).collect();
        vocab.sort();
        vocab.dedup();
        let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        labels = Some(samples.iter().map(|s| index[map[s.as_str()]]).collect());
        class_vocab = vocab;
    }
    if samples.is_empty() {
        return Err(Error::Empty("no samples left after alignment".into()));
    }
    report.samples_kept = samples.len();

    let align = |m: &RawMatrix| -> RawMatrix {
        let pos: HashMap<&str, usize> = m.sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let rows: Vec<usize> = samples.iter().map(|s| pos[s.as_str()]).collect();
        m.select_samples(&rows)
    };

    let mut dataset = OmicsDataset {
        sample_ids: samples.clone(),
        expression: None,
        expr_feature_ids: Vec::new(),
        methylation: Vec::new(),
        labels,
        class_vocab,
    };
    if let Some(e) = &raw.expression {
        let (values, ids, rep) = process_expression(&align(e), &raw.annotation, config)?;
        if !ids.is_empty() {
            dataset.expression = Some(values);
            dataset.expr_feature_ids = ids;
        }
        report.expression = Some(rep);
    }
    if let Some(m) = &raw.methylation {
        let (blocks, rep) = process_methylation(&align(m), &raw.annotation, config)?;
        report.blocks = blocks.iter().map(|b| (b.chromosome, b.feature_ids.len())).collect();
        dataset.methylation = blocks;
        report.methylation = Some(rep);
    }
    if dataset.expression.is_none() && dataset.methylation.is_empty() {
        return Err(Error::Empty("every feature was removed by filtering".into()));
    }
    dataset.validate()?;
    Ok((dataset, report))
}
