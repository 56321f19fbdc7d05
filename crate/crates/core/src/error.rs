use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("edge endpoint `{0}` does not name a node")]
    DanglingEndpoint(String),

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("invalid node: {0}")]
    InvalidNode(String),

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("no embedding for node `{0}`")]
    MissingEmbedding(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("node `{0}` has no text to embed")]
    ZeroText(String),

    #[error("node index {index} out of range for {len} nodes")]
    NodeOutOfRange { index: usize, len: usize },

    #[error("a node cannot be paired with itself (index {0})")]
    SelfPair(usize),

    #[error("pair ({0}, {1}) missing from the probability table")]
    MissingPair(usize, usize),

    #[error("node {0} has no scored partner")]
    NoScoredPartner(usize),

    #[error("empty graph")]
    EmptyGraph,

    #[error("empty cluster")]
    EmptyCluster,

    #[error("wrong level: {0}")]
    WrongLevel(String),

    #[error("invalid labels: {0}")]
    Labels(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("non-finite loss at probe coordinate {0}")]
    NonFiniteProbe(usize),

    #[error("prompt budget {budget} is smaller than the fixed prompt part ({needed})")]
    BudgetTooSmall { budget: usize, needed: usize },

    #[error("generation client: {0}")]
    Client(String),

    #[error("empty response for {0}")]
    EmptyResponse(String),

    #[error("no scorable terms in prompt")]
    NoScorableTerms,

    #[error("missing label for topic (level {level}, cluster {cluster})")]
    MissingLabel { level: usize, cluster: usize },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("taxonomy failed validation: {0}")]
    InvalidTaxonomy(String),

    #[error("clusterings cover different node sets ({pred} vs {gold} nodes)")]
    UniverseMismatch { pred: usize, gold: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
