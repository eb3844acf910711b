use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("point {point:?} outside the finite-difference safe domain")]
    Domain { point: Vec<f64> },
    #[error("singular: {0}")]
    Singular(String),
    #[error("rank-deficient Jacobian at {point:?}")]
    RankDeficient { point: Vec<f64> },
    #[error("metric not positive definite at {point:?} (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { point: Vec<f64>, min_eig: f64 },
    #[error("unknown catalog case '{0}'")]
    UnknownCase(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Json(_) | Error::UnknownCase(_) | Error::Invalid(_) => 2,
            Error::Singular(_)
            | Error::RankDeficient { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NonFinite(_) => 3,
            Error::Domain { .. } => 3,
            Error::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
