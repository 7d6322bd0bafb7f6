//! Embedding TSV files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Per-sample coordinates with optional class names.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub sample_ids: Vec<String>,
    pub values: Matrix,
    pub classes: Option<Vec<String>>,
}

impl Embedding {
    pub fn new(sample_ids: Vec<String>, values: Matrix, classes: Option<Vec<String>>) -> Result<Self> {
        if sample_ids.len() != values.rows() || classes.as_ref().is_some_and(|c| c.len() != values.rows()) {
            return Err(Error::shape("embedding", "sample, value and class counts disagree"));
        }
        Ok(Embedding {
            sample_ids,
            values,
            classes,
        })
    }

    pub fn dims(&self) -> usize {
        self.values.cols()
    }

    /// Header `sample_id`, `dim_1..dim_p`, then `class_name` when labeled.
    /// Values use the shortest decimal form that parses back to the same f64.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("sample_id");
        for d in 1..=self.dims() {
            let _ = write!(out, "\tdim_{d}");
        }
        if self.classes.is_some() {
            out.push_str("\tclass_name");
        }
        out.push('\n');
        for (i, id) in self.sample_ids.iter().enumerate() {
            out.push_str(id);
            for v in self.values.row(i) {
                let _ = write!(out, "\t{v}");
            }
            if let Some(c) = &self.classes {
                out.push('\t');
                out.push_str(&c[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty embedding file".into()))?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.first() != Some(&"sample_id") {
            return Err(err(1, "first column must be sample_id".into()));
        }
        let labeled = cols.last() == Some(&"class_name");
        let dims = cols.len() - 1 - usize::from(labeled);
        for (d, c) in cols[1..=dims].iter().enumerate() {
            if *c != format!("dim_{}", d + 1) {
                return Err(err(1, format!("unexpected column `{c}`")));
            }
        }
        let mut ids = Vec::new();
        let mut values = Vec::new();
        let mut classes = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != cols.len() {
                return Err(err(i + 1, format!("expected {} fields, found {}", cols.len(), f.len())));
            }
            ids.push(f[0].to_string());
            for v in &f[1..=dims] {
                values.push(v.parse::<f64>().map_err(|_| err(i + 1, format!("unparseable value `{v}`")))?);
            }
            if labeled {
                classes.push(f[dims + 1].to_string());
            }
        }
        let values = Matrix::new(ids.len(), dims, values)?;
        Embedding::new(ids, values, labeled.then_some(classes))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    #[test]
    fn round_trip_is_bit_exact() {
        let values = RngState::new(1).gaussian(5, 3).scale(1.0 / 3.0);
        let ids: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let classes = Some((0..5).map(|i| format!("c{}", i % 2)).collect());
        let e = Embedding::new(ids.clone(), values.clone(), classes).unwrap();
        let text = e.to_tsv();
        assert_eq!(text.lines().next().unwrap(), "sample_id\tdim_1\tdim_2\tdim_3\tclass_name");
        assert_eq!(text.lines().count(), 6);
        assert_eq!(Embedding::parse(&text, "t").unwrap(), e);

        let unlabeled = Embedding::new(ids, values, None).unwrap();
        let text = unlabeled.to_tsv();
        assert!(!text.contains("class_name"));
        assert_eq!(Embedding::parse(&text, "t").unwrap(), unlabeled);
    }

    #[test]
    fn malformed() {
        assert!(Embedding::parse("id\tdim_1\n", "t").is_err());
        assert!(Embedding::parse("sample_id\tdim_1\ns\t1\t2\n", "t").is_err());
        assert!(Embedding::parse("sample_id\tdim_1\ns\tx\n", "t").is_err());
    }
}
