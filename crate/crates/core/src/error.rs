use thiserror::Error;

/// Errors raised by the simulator modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular system: rank {rank} of {required} required")]
    Singular { rank: usize, required: usize },

    #[error("null space empty: {feeds} feeds against {constraints} interference constraints")]
    Infeasible { feeds: usize, constraints: usize },

    #[error("{clusters} clusters of capacity {capacity} cannot hold {points} points")]
    Capacity { clusters: usize, capacity: usize, points: usize },

    #[error("group {0} has no members")]
    EmptyGroup(usize),

    #[error("malformed report at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },

    #[error("precoding matrix is identically zero")]
    ZeroMatrix,

    #[error("no channel row for user {0}")]
    MissingRow(usize),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
