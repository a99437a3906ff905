use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("robot index {index} out of range for {num_robots} robots")]
    RobotIndex { index: usize, num_robots: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("construction failed: no valid sample within {budget} retries")]
    RetryBudget { budget: usize },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("robot {robot} is missing the message from neighbor {neighbor}")]
    Synchronization { robot: usize, neighbor: usize },

    #[error("robot {robot} received a message from non-neighbor {from}")]
    UnexpectedSender { robot: usize, from: usize },

    #[error("robot {robot}: message from {from} lacks the `{channel}` payload")]
    Protocol {
        robot: usize,
        from: usize,
        channel: &'static str,
    },

    #[error("capability missing: {0}")]
    Capability(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("centralized oracle failed: {0}")]
    Oracle(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("round {round}, robot {robot}: {source}")]
    InRound {
        round: usize,
        robot: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_round(self, round: usize, robot: usize) -> Self {
        match self {
            e @ Error::InRound { .. } => e,
            e => Error::InRound {
                round,
                robot,
                source: alloc::boxed::Box::new(e),
            },
        }
    }

    /// True for failures raised while iterating (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::Oracle(_) => true,
            Error::InRound { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
