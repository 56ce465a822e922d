use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("empty inference unit")]
    EmptyUnit,

    #[error("units do not partition the image: {0}")]
    Partition(String),

    #[error("invalid unit id {id} (graph has {len} units)")]
    InvalidId { id: usize, len: usize },

    #[error("taxonomy error: {0}")]
    Taxonomy(String),

    #[error("rule syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown class `{name}` at {line}:{column}")]
    UnknownClass {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("duplicate rule id `{0}`")]
    DuplicateRule(String),

    #[error("rule `{id}` has kind {kind} which this reasoner cannot apply")]
    RuleKind { id: String, kind: String },

    #[error("reasoner state error: {0}")]
    State(String),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("probability row {row} sums to {sum}, beyond renormalization tolerance")]
    NotNormalizable { row: usize, sum: f64 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("placement infeasible: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
