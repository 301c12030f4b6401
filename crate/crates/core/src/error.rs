use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("sequence too short{}: {len} frames, context span needs {span}", layer_suffix(*.layer))]
    SequenceTooShort {
        len: usize,
        span: usize,
        layer: Option<usize>,
    },

    #[error("non-finite function value at coordinate {index}")]
    NonFiniteEvaluation { index: usize },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("insufficient statistics: batch normalization needs at least 2 frames, got {frames}")]
    InsufficientStatistics { frames: usize },

    #[error("syntax error at position {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },

    #[error("semantic error [{rule}]: {detail}")]
    Semantic { rule: &'static str, detail: String },

    #[error("cache does not match the model: {0}")]
    Cache(String),

    #[error("training diverged: non-finite values in {block}")]
    Divergence { block: String },

    #[error("requested {requested} LDA dimensions but the rank bound C-1 is {bound}")]
    Rank { requested: usize, bound: usize },

    #[error("within-class scatter is singular; retry with a positive shrinkage (lambda)")]
    Conditioning,

    #[error("cosine score undefined for a zero vector")]
    UndefinedScore,

    #[error("unknown utterance id {0:?}")]
    Lookup(String),

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("unsupported audio format: {field} = {value}")]
    UnsupportedFormat { field: &'static str, value: String },

    #[error("invalid {field}: {msg}")]
    Validation { field: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn layer_suffix(layer: Option<usize>) -> String {
    layer.map(|l| format!(" at layer {l}")).unwrap_or_default()
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }
}
