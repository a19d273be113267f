use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular matrix: pivot {pivot:e} in column {column} is below threshold")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("division by a tangent number with zero value")]
    DivisionByZeroValue,

    #[error("square root of zero with nonzero tangent")]
    SqrtOfZero,

    #[error("tangent width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("implicit Euler step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(step: usize) -> impl FnOnce(Error) -> Error {
        move |e| Error::AtStep {
            step,
            source: Box::new(e),
        }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    /// Innermost error, with step and stage annotations removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } | Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerics (as opposed to usage errors).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::SingularMatrix { .. }
                | Error::NoConvergence { .. }
                | Error::NonFinite { .. }
                | Error::DivisionByZeroValue
                | Error::SqrtOfZero
        )
    }
}
