//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shape disagreement (matmul inner dims, edit row widths, ...).
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// A public operation produced (or was handed) a NaN or infinity.
    #[error("non-finite value in {op}")]
    NonFinite { op: &'static str },

    /// Mini-language syntax error, reported at a word index within the sentence.
    #[error("syntax error at token {position}: expected {expected}, found `{found}`")]
    Syntax {
        position: usize,
        expected: String,
        found: String,
    },

    /// A word outside the generator vocabulary.
    #[error("unknown vocabulary word `{word}`")]
    UnknownWord { word: String },

    /// The theory derives an atom with both polarities.
    #[error("contradictory theory: `{atom}` derived with both polarities")]
    Contradiction { atom: String },

    /// Token sequence longer than the model's positional table.
    #[error("sequence length {len} exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },

    /// An edit or selector referenced a position past the end of the prompt.
    #[error("position {position} out of range for sequence of length {len}")]
    PositionOutOfRange { position: usize, len: usize },

    /// Two edits targeted the same hook point in one forward pass.
    #[error("conflicting edits at hook {hook}")]
    ConflictingEdits { hook: String },

    /// A selector kind that the given prompt cannot satisfy.
    #[error("selector inapplicable: {0}")]
    SelectorInapplicable(String),

    /// Requested hook missing from an activation cache.
    #[error("activation cache has no entry for hook {0}")]
    MissingCache(String),

    /// Interchange pair whose base/override annotations disagree.
    #[error("alignment violation: {0}")]
    Alignment(String),

    /// Training loss went non-finite.
    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: u64 },

    /// Generator could not satisfy its constraints within the retry budget.
    #[error("generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    /// Checkpoint file failed validation.
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    /// Checkpoint written by an incompatible format version.
    #[error("checkpoint version mismatch: found `{found}`, expected `{expected}`")]
    CheckpointVersion { found: String, expected: String },

    /// Dataset file violated its schema.
    #[error("dataset schema error at line {line}: {detail}")]
    Schema { line: usize, detail: String },

    /// Invalid configuration value.
    #[error("invalid config: {0}")]
    Config(String),

    /// A metric was asked to aggregate over nothing.
    #[error("empty dataset for {0}")]
    EmptyDataset(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
