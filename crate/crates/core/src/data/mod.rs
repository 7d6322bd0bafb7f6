//! Multi-omics datasets: file loading, preprocessing, chromosome grouping,
//! stratified folds, a binary cache and a seeded synthetic generator.

mod cache;
mod folds;
mod preprocess;
mod synthetic;
mod tsv;

pub use cache::{load_dataset_cache, save_dataset_cache, DATASET_MAGIC, DATASET_VERSION};
pub use folds::{stratified_kfold, FoldRound, FoldSplit};
pub use preprocess::{preprocess, MinMaxScaler, ModalityReport, PreprocessConfig, PreprocessReport, RawOmics};
pub use synthetic::{synthesize, SyntheticMode, SyntheticSpec};
pub use tsv::{
    labels_to_tsv, load_labels, load_matrix_tsv, parse_labels, parse_matrix_tsv, write_text, Chromosome,
    FeatureAnnotation, Orientation, RawMatrix, MISSING,
};

use crate::error::{Error, Result};
use crate::model::ModelInput;
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct MethylationBlock {
    pub chromosome: Chromosome,
    pub feature_ids: Vec<String>,
    /// Samples × block features.
    pub values: Matrix,
}

/// Preprocessed samples with aligned modalities.
#[derive(Clone, Debug, PartialEq)]
pub struct OmicsDataset {
    pub sample_ids: Vec<String>,
    pub expression: Option<Matrix>,
    pub expr_feature_ids: Vec<String>,
    /// Ordered by chromosome 1–22, X; chromosomes without features are absent.
    pub methylation: Vec<MethylationBlock>,
    pub labels: Option<Vec<usize>>,
    pub class_vocab: Vec<String>,
}

impl OmicsDataset {
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_vocab.len()
    }

    pub fn expr_dim(&self) -> usize {
        self.expression.as_ref().map_or(0, Matrix::cols)
    }

    pub fn methyl_block_dims(&self) -> Vec<usize> {
        self.methylation.iter().map(|b| b.values.cols()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let rows_ok = self.expression.as_ref().is_none_or(|e| e.rows() == n && e.cols() == self.expr_feature_ids.len())
            && self
                .methylation
                .iter()
                .all(|b| b.values.rows() == n && b.values.cols() == b.feature_ids.len());
        if !rows_ok {
            return Err(Error::shape("dataset", "modality matrices disagree with sample or feature counts"));
        }
        if self.expression.is_none() && self.methylation.is_empty() {
            return Err(Error::Empty("dataset has no modality".into()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Label(format!("{} labels for {n} samples", labels.len())));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= self.class_vocab.len()) {
                return Err(Error::Label(format!("label index {bad} outside vocabulary")));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Label("dataset has no labels".into()))
    }

    pub fn model_input(&self) -> ModelInput {
        ModelInput {
            expr: self.expression.clone(),
            methyl: self.methylation.iter().map(|b| b.values.clone()).collect(),
        }
    }

    pub fn select(&self, rows: &[usize]) -> OmicsDataset {
        OmicsDataset {
            sample_ids: rows.iter().map(|&r| self.sample_ids[r].clone()).collect(),
            expression: self.expression.as_ref().map(|e| e.select_rows(rows)),
            expr_feature_ids: self.expr_feature_ids.clone(),
            methylation: self
                .methylation
                .iter()
                .map(|b| MethylationBlock {
                    chromosome: b.chromosome,
                    feature_ids: b.feature_ids.clone(),
                    values: b.values.select_rows(rows),
                })
                .collect(),
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect()),
            class_vocab: self.class_vocab.clone(),
        }
    }

    /// Drop a modality (single-omics baselines).
    pub fn with_modalities(&self, expression: bool, methylation: bool) -> Result<OmicsDataset> {
        let mut out = self.clone();
        if !expression {
            out.expression = None;
            out.expr_feature_ids.clear();
        }
        if !methylation {
            out.methylation.clear();
        }
        out.validate()?;
        Ok(out)
    }

    /// Re-derive the expression min-max scaling from the `train` rows only and
    /// apply it to every row, clipping to [0, 1].
    pub fn rescale_expression(&self, train: &[usize]) -> Result<OmicsDataset> {
        match self.expression_scaler(train)? {
            Some(scaler) => self.apply_expression_scaler(&scaler),
            None => Ok(self.clone()),
        }
    }

    /// Min-max scaling fitted on the expression values of the `train` rows.
    pub fn expression_scaler(&self, train: &[usize]) -> Result<Option<MinMaxScaler>> {
        self.expression
            .as_ref()
            .map(|e| MinMaxScaler::fit(&e.select_rows(train)))
            .transpose()
    }

    pub fn apply_expression_scaler(&self, scaler: &MinMaxScaler) -> Result<OmicsDataset> {
        let mut out = self.clone();
        if let Some(e) = &self.expression {
            out.expression = Some(scaler.transform(e)?);
        }
        Ok(out)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in self.labels.iter().flatten() {
            counts[l] += 1;
        }
        counts
    }

    /// The dataset as fully observed raw matrices plus annotation and labels.
    pub fn to_raw(&self) -> Result<RawOmics> {
        let expression = match &self.expression {
            Some(e) => Some(RawMatrix::dense(self.sample_ids.clone(), self.expr_feature_ids.clone(), e.clone())?),
            None => None,
        };
        let mut annotation = FeatureAnnotation::default();
        let methylation = if self.methylation.is_empty() {
            None
        } else {
            let parts: Vec<&Matrix> = self.methylation.iter().map(|b| &b.values).collect();
            let mut ids = Vec::new();
            for b in &self.methylation {
                for f in &b.feature_ids {
                    annotation.insert(f.clone(), Some(b.chromosome));
                    ids.push(f.clone());
                }
            }
            Some(RawMatrix::dense(self.sample_ids.clone(), ids, Matrix::hcat(&parts)?)?)
        };
        let labels = self.labels.as_ref().map(|l| {
            self.sample_ids
                .iter()
                .zip(l)
                .map(|(s, &c)| (s.clone(), self.class_vocab[c].clone()))
                .collect()
        });
        Ok(RawOmics {
            expression,
            methylation,
            annotation,
            labels,
        })
    }
}
