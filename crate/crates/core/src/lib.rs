//! Semi-supervised multi-omics variational autoencoder with hand-written
//! backpropagation, plus the data, training and evaluation pipeline around it.

mod binio;
pub mod data;
pub mod error;
pub mod eval;
pub mod kv;
pub mod layers;
pub mod loss;
pub mod model;
pub mod numerics;
pub mod optim;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngState};
pub use data::OmicsDataset;
pub use kv::KvDoc;
pub use model::{ModelConfig, OmiVaeModel};
pub use optim::{History, TrainConfig};
