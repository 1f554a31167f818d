//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two tensors with incompatible shapes were combined.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A sequence is shorter than an operation's receptive field.
    #[error("sequence too short for {what}: length {len} < required {min}")]
    SequenceTooShort {
        what: String,
        len: usize,
        min: usize,
    },

    /// Batch normalization in train mode saw fewer than two positions.
    #[error("degenerate batch: batch normalization needs >= 2 positions per channel, got {0}")]
    DegenerateBatch(usize),

    /// An API contract was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty corpus: no token sequences to build a vocabulary from")]
    EmptyCorpus,

    #[error("insufficient vocabulary: {have} sampleable tokens, need at least {need}")]
    InsufficientVocabulary { have: usize, need: usize },

    #[error("empty document: {0}")]
    EmptyDocument(String),

    /// Cosine distance of a zero-norm latent vector.
    #[error("undefined distance: zero-norm latent vector")]
    UndefinedDistance,

    #[error("negative sampling failed in {mode} mode: {reason}")]
    Sampling { mode: String, reason: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("referential integrity: {0}")]
    ReferentialIntegrity(String),

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("underfull split: {0}")]
    UnderfullSplit(String),

    #[error("undefined AUC: {0}")]
    UndefinedAuc(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {value}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f32 },

    /// Checkpoint bytes do not start with the expected magic.
    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),

    #[error("checkpoint version mismatch: found {found}, supported {supported}")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("checkpoint truncated: {0}")]
    Truncated(String),

    #[error("checkpoint checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than runtime failures.
    /// The CLI maps data errors to exit code 2 and the rest to 3.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::ReferentialIntegrity(_)
                | Error::DuplicateId(_)
                | Error::EmptyDocument(_)
                | Error::EmptyCorpus
                | Error::NotFound(_)
                | Error::CheckpointFormat(_)
                | Error::VersionMismatch { .. }
                | Error::Truncated(_)
                | Error::ChecksumMismatch { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
