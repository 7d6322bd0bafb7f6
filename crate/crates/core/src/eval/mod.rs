//! Classification metrics, the PCA baseline, a logistic probe for embedding
//! quality, embedding files and scatter plots.

mod export;
mod metrics;
mod pca;
mod plot;
mod probe;

pub use export::Embedding;
pub use metrics::{compute_metrics, ClassMetrics, EvalReport};
pub use pca::{pca_fit, pca_fit_with, PcaMethod, PcaModel};
pub use plot::{render_scatter, PALETTE};
pub use probe::{probe_fit, ProbeClassifier, ProbeConfig};

use crate::data::OmicsDataset;
use crate::error::Result;
use crate::model::OmiVaeModel;

/// Latent means (Infer mode) of every sample.
pub fn embed_dataset(model: &OmiVaeModel, dataset: &OmicsDataset) -> Result<Embedding> {
    let mu = model.infer(&dataset.model_input())?.mu;
    let classes = dataset
        .labels
        .as_ref()
        .map(|l| l.iter().map(|&c| dataset.class_vocab[c].clone()).collect());
    Embedding::new(dataset.sample_ids.clone(), mu, classes)
}
