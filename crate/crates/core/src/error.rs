use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate factor label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown factor label `{0}`")]
    UnknownLabel(String),

    #[error("factor `{0}` has dimension 0")]
    ZeroDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not an isometry (deviation {0:e})")]
    NotIsometry(f64),

    #[error("state is not normalized (norm deviation {0:e})")]
    NotNormalized(f64),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("Kraus operators are not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown builtin channel `{0}`")]
    UnknownChannel(String),

    #[error("infeasible dimensions: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Errors that come from a problem too large (or too small) to simulate,
    /// as opposed to malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
