//! Error types shared across the crate.

use std::path::PathBuf;

/// Coarse error class, used by callers (e.g. the CLI) to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad model artifacts or a failure inside the inference engine.
    Model,
    /// Bad input data: datasets, samples, degenerate statistics.
    Data,
}

/// Errors produced by the engine and analysis modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // Weight bundle / model loading
    #[error("bad bundle magic in {path}: expected \"HALOTNSR\"")]
    BadMagic { path: PathBuf },
    #[error("malformed bundle header in {path}: {reason}")]
    BadHeader { path: PathBuf, reason: String },
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("tensor `{name}` has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("tensor `{0}` contains a non-finite value")]
    NonFinite(String),
    #[error("tensor `{name}` has unsupported dtype `{dtype}`")]
    UnsupportedDtype { name: String, dtype: String },
    #[error("invalid model config: {0}")]
    BadConfig(String),

    // Tokenizer
    #[error("malformed tokenizer file {path}: {reason}")]
    BadTokenizerFile { path: PathBuf, reason: String },
    #[error("no vocabulary entry matches input at byte offset {offset}")]
    UnknownToken { offset: usize },

    // Engine
    #[error("token id {id} out of range (vocab size {vocab_size})")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("sequence length {len} exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("empty token sequence")]
    EmptySequence,
    #[error("capture target (layer {layer}, position {position}) out of range")]
    CaptureOutOfRange { layer: usize, position: usize },
    #[error("invalid attention block spec: {0}")]
    BadBlockSpec(String),
    #[error("invalid steering spec: {0}")]
    BadSteeringSpec(String),
    #[error("prompt of {prompt} tokens plus {new} new tokens exceeds max_seq_len {max}")]
    ContextOverflow { prompt: usize, new: usize, max: usize },

    // Probe / directions
    #[error("sample `{0}` requests knowledge but none is present")]
    MissingKnowledge(String),
    #[error("tokenized prefix mismatch between branches for sample `{0}`")]
    PrefixMismatch(String),
    #[error("hidden state with zero norm (layer {layer}, position {position})")]
    DegenerateHiddenState { layer: usize, position: usize },
    #[error("degenerate data for PCA: {0}")]
    DegenerateData(String),
    #[error("sample `{id}` is missing its {kind} transition vector")]
    MissingTransition { id: String, kind: &'static str },
    #[error("vector length {got} does not match hidden size {expected}")]
    BadVectorLength { expected: usize, got: usize },

    // Datasets
    #[error("parse failure in {path} at line {line}: {reason}")]
    ParseFailure {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("unknown dataset format `{0}`")]
    UnknownFormat(String),
    #[error("sample_n = {requested} exceeds {available} rows after filtering")]
    SampleTooLarge { requested: usize, available: usize },

    // Stats
    #[error("need at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },
    #[error("zero variance in input values")]
    ZeroVariance,
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("degenerate regressor: variance of x is zero")]
    DegenerateRegressor,

    // Batch drivers
    #[error("all {0} samples were skipped; no records produced")]
    EmptyResult(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Classify the error for exit-code mapping.
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Io { .. } | BadMagic { .. } | BadHeader { .. } | MissingTensor(_)
            | ShapeMismatch { .. } | NonFinite(_) | UnsupportedDtype { .. } | BadConfig(_)
            | BadTokenizerFile { .. } | TokenOutOfRange { .. } | SequenceTooLong { .. }
            | EmptySequence | CaptureOutOfRange { .. } | BadBlockSpec(_) | BadSteeringSpec(_)
            | ContextOverflow { .. } | DegenerateHiddenState { .. } => ErrorKind::Model,
            UnknownToken { .. } | MissingKnowledge(_) | PrefixMismatch(_) | DegenerateData(_)
            | MissingTransition { .. } | BadVectorLength { .. } | ParseFailure { .. }
            | UnknownFormat(_) | SampleTooLarge { .. } | TooFewValues { .. } | ZeroVariance
            | LengthMismatch { .. } | DegenerateRegressor | EmptyResult(_)
            | InvalidArgument(_) => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
