use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("direction vector must be nonzero")]
    ZeroDirection,

    #[error("set is empty")]
    EmptySet,

    #[error("axis {axis} out of range for dimension {dim}")]
    InvalidAxis { axis: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Evaluation too close to a manifold where the equations of motion divide by zero.
    #[error("dynamics singularity: {0}")]
    Singularity(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("optimizer failed: {0}")]
    Solver(String),

    #[error("reachability step failed: {0}")]
    Reach(String),

    #[error("scenario error at `{field}`: {message}")]
    Scenario { field: String, message: String },

    #[error("export self-check failed for {file}: {message}")]
    Export { file: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }

    pub(crate) fn scenario(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            field: field.into(),
            message: message.into(),
        }
    }
}
