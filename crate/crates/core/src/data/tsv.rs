//! Tab-separated matrix, annotation and label files.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const MISSING: &str = "NA";

/// Layout of a matrix file on disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Header `id` + sample IDs; one row per feature.
    FeaturesByRows,
    /// Header `id` + feature IDs; one row per sample.
    SamplesByRows,
}

/// Samples × features values with a missing-value mask. Masked cells hold 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMatrix {
    pub sample_ids: Vec<String>,
    pub feature_ids: Vec<String>,
    pub values: Matrix,
    pub missing: Vec<bool>,
}

impl RawMatrix {
    pub fn new(sample_ids: Vec<String>, feature_ids: Vec<String>, values: Matrix, missing: Vec<bool>) -> Result<Self> {
        if values.rows() != sample_ids.len() || values.cols() != feature_ids.len() || missing.len() != values.data().len() {
            return Err(Error::shape(
                "raw matrix",
                format!(
                    "{} samples × {} features against {}x{} values and {} mask cells",
                    sample_ids.len(),
                    feature_ids.len(),
                    values.rows(),
                    values.cols(),
                    missing.len()
                ),
            ));
        }
        check_unique(&sample_ids)?;
        check_unique(&feature_ids)?;
        Ok(RawMatrix {
            sample_ids,
            feature_ids,
            values,
            missing,
        })
    }

    /// Fully observed matrix.
    pub fn dense(sample_ids: Vec<String>, feature_ids: Vec<String>, values: Matrix) -> Result<Self> {
        let missing = vec![false; values.data().len()];
        Self::new(sample_ids, feature_ids, values, missing)
    }

    pub fn samples(&self) -> usize {
        self.values.rows()
    }

    pub fn features(&self) -> usize {
        self.values.cols()
    }

    pub fn is_missing(&self, sample: usize, feature: usize) -> bool {
        self.missing[sample * self.features() + feature]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Keep the given feature columns, in the given order.
    pub fn select_features(&self, cols: &[usize]) -> RawMatrix {
        let n = self.samples();
        let f = self.features();
        let values = self.values.select_cols(cols);
        let mut missing = Vec::with_capacity(n * cols.len());
        for i in 0..n {
            missing.extend(cols.iter().map(|&c| self.missing[i * f + c]));
        }
        RawMatrix {
            sample_ids: self.sample_ids.clone(),
            feature_ids: cols.iter().map(|&c| self.feature_ids[c].clone()).collect(),
            values,
            missing,
        }
    }

    pub fn select_samples(&self, rows: &[usize]) -> RawMatrix {
        let f = self.features();
        let mut missing = Vec::with_capacity(rows.len() * f);
        for &r in rows {
            missing.extend_from_slice(&self.missing[r * f..(r + 1) * f]);
        }
        RawMatrix {
            sample_ids: rows.iter().map(|&r| self.sample_ids[r].clone()).collect(),
            feature_ids: self.feature_ids.clone(),
            values: self.values.select_rows(rows),
            missing,
        }
    }

    pub fn to_tsv(&self, orientation: Orientation) -> String {
        let cell = |i: usize, j: usize| {
            if self.is_missing(i, j) {
                MISSING.to_string()
            } else {
                self.values.get(i, j).to_string()
            }
        };
        let mut out = String::from("id");
        match orientation {
            Orientation::FeaturesByRows => {
                for s in &self.sample_ids {
                    let _ = write!(out, "\t{s}");
                }
                out.push('\n');
                for (j, f) in self.feature_ids.iter().enumerate() {
                    out.push_str(f);
                    for i in 0..self.samples() {
                        out.push('\t');
                        out.push_str(&cell(i, j));
                    }
                    out.push('\n');
                }
            }
            Orientation::SamplesByRows => {
                for f in &self.feature_ids {
                    let _ = write!(out, "\t{f}");
                }
                out.push('\n');
                for (i, s) in self.sample_ids.iter().enumerate() {
                    out.push_str(s);
                    for j in 0..self.features() {
                        out.push('\t');
                        out.push_str(&cell(i, j));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

fn parse_err(source: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines with their 1-based line numbers; trailing `\r` stripped.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn parse_matrix_tsv(text: &str, source: &str, orientation: Orientation) -> Result<RawMatrix> {
    let mut it = lines(text);
    let (_, header) = it.next().ok_or_else(|| parse_err(source, 1, "empty file"))?;
    let columns: Vec<String> = header.split('\t').skip(1).map(|s| s.trim().to_string()).collect();
    check_unique(&columns)?;

    let mut row_ids = Vec::new();
    let mut cells = Vec::new();
    let mut mask = Vec::new();
    for (ln, line) in it {
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().trim().to_string();
        let before = cells.len();
        for f in fields {
            let f = f.trim();
            if f == MISSING || f.is_empty() {
                cells.push(0.0);
                mask.push(true);
            } else {
                let v: f64 = f
                    .parse()
                    .map_err(|_| parse_err(source, ln, format!("unparseable value `{f}`")))?;
                if !v.is_finite() {
                    return Err(parse_err(source, ln, format!("non-finite value `{f}`")));
                }
                cells.push(v);
                mask.push(false);
            }
        }
        let got = cells.len() - before;
        if got != columns.len() {
            return Err(parse_err(
                source,
                ln,
                format!("expected {} values, found {got}", columns.len()),
            ));
        }
        row_ids.push(id);
    }
    check_unique(&row_ids)?;

    let file = Matrix::new(row_ids.len(), columns.len(), cells)?;
    match orientation {
        Orientation::SamplesByRows => RawMatrix::new(row_ids, columns, file, mask),
        Orientation::FeaturesByRows => {
            let (r, c) = (row_ids.len(), columns.len());
            let mut t_mask = vec![false; r * c];
            for i in 0..r {
                for j in 0..c {
                    t_mask[j * r + i] = mask[i * c + j];
                }
            }
            RawMatrix::new(columns, row_ids, file.transpose(), t_mask)
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_matrix_tsv(path: &Path, orientation: Orientation) -> Result<RawMatrix> {
    parse_matrix_tsv(&read_text(path)?, &path.display().to_string(), orientation)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Chromosome a methylation probe targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Chromosome {
    /// Autosome 1..=22.
    Autosome(u8),
    X,
    Y,
}

impl Chromosome {
    pub fn parse(s: &str) -> Option<Chromosome> {
        let s = s.trim();
        let s = s.strip_prefix("chr").unwrap_or(s);
        match s {
            "X" | "x" => Some(Chromosome::X),
            "Y" | "y" => Some(Chromosome::Y),
            _ => s.parse::<u8>().ok().filter(|n| (1..=22).contains(n)).map(Chromosome::Autosome),
        }
    }

    pub fn name(self) -> String {
        match self {
            Chromosome::Autosome(n) => n.to_string(),
            Chromosome::X => "X".into(),
            Chromosome::Y => "Y".into(),
        }
    }

    /// The chromosomes that form methylation blocks, in block order.
    pub fn grouping_order() -> Vec<Chromosome> {
        (1..=22).map(Chromosome::Autosome).chain([Chromosome::X]).collect()
    }
}

/// Feature → chromosome map. Absent or `NA` entries are unmapped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureAnnotation {
    pub chromosome: BTreeMap<String, Option<Chromosome>>,
}

impl FeatureAnnotation {
    pub fn get(&self, feature: &str) -> Option<Chromosome> {
        self.chromosome.get(feature).copied().flatten()
    }

    pub fn insert(&mut self, feature: impl Into<String>, chr: Option<Chromosome>) {
        self.chromosome.insert(feature.into(), chr);
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut out = FeatureAnnotation::default();
        for (ln, line) in lines(text).skip(1) {
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(parse_err(source, ln, format!("expected 2 columns, found {}", fields.len())));
            }
            let chr = if fields[1] == MISSING {
                None
            } else {
                Some(
                    Chromosome::parse(fields[1])
                        .ok_or_else(|| parse_err(source, ln, format!("unknown chromosome `{}`", fields[1])))?,
                )
            };
            if out.chromosome.insert(fields[0].to_string(), chr).is_some() {
                return Err(Error::DuplicateId(fields[0].to_string()));
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("feature_id\tchromosome\n");
        for (f, c) in &self.chromosome {
            let c = c.map_or_else(|| MISSING.to_string(), Chromosome::name);
            let _ = writeln!(out, "{f}\t{c}");
        }
        out
    }
}

/// `sample_id → class_name` pairs in file order.
pub fn parse_labels(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (ln, line) in lines(text).skip(1) {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields[1].is_empty() {
            return Err(parse_err(source, ln, "expected sample_id and class_name"));
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(Error::DuplicateId(fields[0].to_string()));
        }
        out.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(out)
}

pub fn load_labels(path: &Path) -> Result<Vec<(String, String)>> {
    parse_labels(&read_text(path)?, &path.display().to_string())
}

pub fn labels_to_tsv(labels: &[(String, String)]) -> String {
    let mut out = String::from("sample_id\tclass_name\n");
    for (s, c) in labels {
        let _ = writeln!(out, "{s}\t{c}");
    }
    out
}
