use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid cluster structure: {0}")]
    InvalidStructure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    NumericalFailure { iteration: usize, message: String },

    #[error("subgroup {subgroup}: {source}")]
    Subgroup {
        subgroup: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("all {} starts failed: {}", .0.len(), summarize_starts(.0))]
    AllStartsFailed(Vec<(usize, Error)>),

    #[error("unsupported prediction: {0}")]
    UnsupportedPrediction(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
}

impl Error {
    /// True when the error originates from an iterative solver rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalFailure { .. } => true,
            Error::Subgroup { source, .. } => source.is_numerical(),
            Error::AllStartsFailed(errs) => errs.iter().any(|(_, e)| e.is_numerical()),
            _ => false,
        }
    }
}

fn summarize_starts(errs: &[(usize, Error)]) -> String {
    errs.iter()
        .map(|(i, e)| format!("start {i}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}
