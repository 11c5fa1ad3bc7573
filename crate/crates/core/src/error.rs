use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Estimation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("arm column is not binary: row {row} has value {value:?}")]
    ArmNotBinary { row: usize, value: String },
    #[error("arm {0} has no participants")]
    EmptyArm(u8),
    #[error("missing outcome at row {0}")]
    MissingOutcome(usize),
    #[error("covariate {0:?} is missing in every row")]
    AllMissingColumn(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("covariate matrix contains missing or non-finite values; impute first")]
    MissingCovariates,
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("cannot build {k} folds: {reason}")]
    TooManyFolds { k: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("complete or quasi-complete separation (max |coef| = {max_coef:.1})")]
    Separation { max_coef: f64 },
    #[error("singular weighted design: {0}")]
    Singular(String),
    #[error("no convergence after {iterations} iterations: {what}")]
    NonConvergence { what: String, iterations: usize },
    #[error("fold {fold} has degenerate randomization probability {pi}; use stratified folds")]
    DegenerateFold { fold: usize, pi: f64 },
    #[error("degenerate randomization probability {0}")]
    DegeneratePi(f64),
    #[error("contrast undefined: {0}")]
    DomainError(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },
    #[error("{failed} of {total} replicates failed (first error: {first})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. } => ErrorKind::Config,
            Error::MalformedCsv(_)
            | Error::ArmNotBinary { .. }
            | Error::EmptyArm(_)
            | Error::MissingOutcome(_)
            | Error::AllMissingColumn(_)
            | Error::UnknownColumn(_)
            | Error::MissingCovariates
            | Error::InvalidData(_)
            | Error::Io(_) => ErrorKind::Data,
            _ => ErrorKind::Estimation,
        }
    }
}
