use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} at index {index} is not a probability vector (sum = {sum}, min = {min})")]
    InvalidDistribution {
        what: &'static str,
        index: usize,
        sum: f64,
        min: f64,
    },

    #[error("{what} at index {index} is out of range: {value}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trajectory {trajectory}: {message}")]
    InvalidTrajectory { trajectory: usize, message: String },

    #[error("expert is not deterministic: step {step}, state {state} carries actions {first} and {second}")]
    ConflictingExpertAction {
        step: usize,
        state: usize,
        first: usize,
        second: usize,
    },

    #[error("environment is not a {family} instance: {reason}")]
    WrongFamily {
        family: &'static str,
        reason: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Wraps an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
