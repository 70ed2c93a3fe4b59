use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} out of range (graph has {node_count} nodes)")]
    NodeOutOfRange { node: usize, node_count: usize },

    #[error("node {0} has no incident edges; the interpretable space is empty")]
    EmptyInterpretableSpace(usize),

    #[error("node {0} is absent from the inference graph")]
    NodeAbsent(usize),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid subgraph: {0}")]
    InvalidSubgraph(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no labeled nodes under the training mask")]
    NoLabeledNodes,

    #[error("ground truth is empty")]
    EmptyGroundTruth,

    #[error("explanation is empty")]
    EmptyExplanation,

    #[error("neighborhood has {edges} edges, above the enumeration guard of {guard}")]
    GuardExceeded { edges: usize, guard: usize },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn from_json(path: &str, err: &serde_json::Error) -> Self {
        Error::Parse {
            path: path.to_string(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
