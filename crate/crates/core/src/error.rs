use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rank {rank} out of range 0..={len}")]
    RankOutOfRange { rank: usize, len: usize },

    #[error("exponential overflow evaluating rate at x = {x} (k·x = {exponent})")]
    Overflow { x: f64, exponent: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no relevant documents in the fitted sample")]
    NoSignal,

    #[error("exponential fit did not converge after {iterations} iterations")]
    FitFailure { iterations: usize },

    #[error("topic {0} has no relevant documents")]
    NoRelevant(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("input contains no records")]
    EmptyRun,

    #[error("topic {0} is missing from the qrels")]
    MissingTopic(String),
}

impl Error {
    /// Parse and validation failures come from the inputs, everything else
    /// from the computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::EmptyRun
                | Error::MissingTopic(_)
                | Error::NoRelevant(_)
        )
    }
}
