//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic {found:?}, expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("{path}: unsupported version {found} (this build reads version {supported})")]
    UnsupportedVersion {
        path: PathBuf,
        found: u16,
        supported: u16,
    },

    #[error("{path}: corrupt weights: {detail}")]
    CorruptWeights { path: PathBuf, detail: String },

    #[error("{path}: corrupt file: {detail}")]
    CorruptFile { path: PathBuf, detail: String },

    #[error("model spec invariant violated: {0}")]
    SpecInvariant(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("layer index {layer} out of range for model with {num_layers} layers")]
    LayerOutOfRange { layer: usize, num_layers: usize },

    #[error("context overflow: sequence of length {length} exceeds max context {max_context}")]
    ContextOverflow { length: usize, max_context: usize },

    #[error("token id {token} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("pair {pair_id}: {source}")]
    Pair {
        pair_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("layer {layer}: only {usable} usable difference vectors after degeneracy filtering (need at least {required})")]
    InsufficientPairs {
        layer: usize,
        usable: usize,
        required: usize,
    },

    #[error("no principal direction: input vectors have zero variance")]
    ZeroVariance,

    #[error("{path}:{line}: {detail}")]
    Dataset {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("duplicate record id {id:?}")]
    DuplicateId { id: String },

    #[error("record {id:?} has no reasoning but the pair template requires it")]
    MissingReasoning { id: String },

    #[error("record id mismatch while scoring: {0}")]
    IdMismatch(String),

    #[error("zero-variance input to correlation")]
    ZeroVarianceInput,

    #[error("{path}: parse error: {detail}")]
    Parse { path: PathBuf, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a pair id to an error propagating out of trace collection.
    pub fn for_pair(pair_id: &str, source: Error) -> Self {
        Error::Pair {
            pair_id: pair_id.to_string(),
            source: Box::new(source),
        }
    }
}
