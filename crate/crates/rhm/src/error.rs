use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("row {0} is not one-hot")]
    MalformedMatrix(usize),

    #[error("{name} = {value} out of range {range}")]
    RangeError {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// An all-zero message: the evidence is incompatible with every
    /// derivation. Only reachable with hard (delta) leaf beliefs.
    #[error("contradictory evidence: all-zero message at level {level}, node {node}")]
    ContradictoryEvidence { level: usize, node: usize },

    #[error("channel does not support stepwise reversal")]
    UnsupportedChannel,

    #[error("need at least 2 trajectories per start, got {0}")]
    InsufficientTrajectories(usize),

    #[error("degenerate clustering input: {0}")]
    DegenerateInput(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("malformed rule set: {0}")]
    MalformedRules(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn range(name: &'static str, value: f64, range: &'static str) -> Self {
        Error::RangeError { name, value, range }
    }
}
