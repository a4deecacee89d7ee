use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a documented precondition.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    /// The normalization of the evolved state vanished.
    #[error("state norm vanished ({context}); the evolution extinguished every trajectory")]
    Extinction { context: String },

    #[error("non-finite matrix entry after {steps} steps; the step size is too large")]
    NonFinite { steps: usize },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("invalid bracket [{lo}, {hi}]: both ends are in the same phase")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("operation requires the PT-unbroken phase (max |Im E| = {max_imag:e})")]
    BrokenPhase { max_imag: f64 },

    #[error("dimension guard exceeded: {what} = {value} > {limit}")]
    DimensionGuard {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("matrix square root failed: residual eigenvalue {0:e} is negative")]
    NotPositive(f64),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. }
            | Error::InvalidBracket { .. }
            | Error::BrokenPhase { .. }
            | Error::DimensionGuard { .. }
            | Error::Config(_)
            | Error::Io(_)
            | Error::Json(_) => 1,
            Error::Extinction { .. }
            | Error::NonFinite { .. }
            | Error::Eigen(_)
            | Error::NotPositive(_) => 2,
        }
    }
}
