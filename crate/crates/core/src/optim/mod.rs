//! Optimization: Adam, the two-phase training driver and checkpoints.

mod adam;
mod checkpoint;
mod train;

pub use adam::AdamState;
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use train::{
    batch_indices, train_phase, train_two_phase, EpochRecord, History, LabeledSet, Phase, PhaseConfig,
    PhaseSummary, TrainConfig, TrainData, HISTORY_COLUMNS,
};
