//! Synthetic dataset generation: balanced labeled splits and aligned
//! interchange pairs, with full token-span annotations.

mod generator;
mod interchange;
mod io;
mod prompt;
mod tokenizer;

pub use generator::{GenConfig, Generator};
pub use io::{
    emit_interchange, emit_labeled, load_interchange, load_labeled, DatasetHeader, DATASET_FORMAT,
    DATASET_VERSION,
};
pub use prompt::{
    target_positions, AnnotatedPrompt, InterchangeExample, LabeledExample, TargetKind,
};
pub use tokenizer::{Tokenizer, PUNCTUATION, STRUCTURAL_WORDS};
