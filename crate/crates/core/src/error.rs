use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing dataset file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{file}: expected {expected} rows, found {found}")]
    RowCountMismatch {
        file: String,
        expected: usize,
        found: usize,
    },

    #[error("label out of range: node {node} has label {label}, num_classes = {num_classes}")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("node index {index} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },

    #[error("failed to parse {file}: {message}")]
    Parse { file: String, message: String },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph has no edges")]
    EmptyEdgeSet,

    #[error("every node is isolated")]
    AllNodesIsolated,

    #[error("at least two classes are required")]
    SingleClass,

    #[error("empty {0} mask")]
    EmptyMask(&'static str),

    #[error("class {class} has {available} nodes, {required} required")]
    ClassTooSmall {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("requested {k} neighbours but only {available} reference rows exist")]
    TooFewReferences { k: usize, available: usize },

    #[error("both positive and negative examples are required")]
    SingleClassScores,

    #[error("variable groups overlap")]
    OverlappingGroups,

    #[error("state space of {states} exceeds the enumeration limit {limit}")]
    StateSpaceOverflow { states: u128, limit: u128 },

    #[error("infeasible generator configuration: {0}")]
    Infeasible(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
