//! Hookable decoder-only transformer classifier, checkpointing, training.

mod checkpoint;
mod config;
mod hooks;
mod train;
mod transformer;

pub use checkpoint::{file_id, load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{ModelConfig, N_CLASSES};
pub use hooks::{ActivationCache, ActivationEdit, EditAction, HookPoint};
pub use train::{accuracy, train, TraceEntry, TrainConfig, TrainOutcome};
pub use transformer::{classify, TransformerModel};
