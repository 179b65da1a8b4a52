use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping of errors, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad parameters supplied by the caller.
    Config,
    /// Malformed or inconsistent input data.
    Data,
    /// A metric is undefined for the given inputs.
    Metric,
    /// Filesystem failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("malformed header in {}: {reason}", path.display())]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("malformed {what}: {reason}")]
    Malformed { what: String, reason: String },

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {tensor} at flat index {index}")]
    NonFiniteValue { tensor: String, index: usize },

    #[error("zero-norm row {row} in {tensor}")]
    ZeroNormRow { tensor: String, row: usize },

    #[error("vector has zero norm")]
    ZeroNorm,

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("k = {k} is out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("index {index} is out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("every group is empty; no samples to evaluate")]
    AllGroupsEmpty,

    #[error("value {value} outside [0, 1] for {what}")]
    DomainError { what: &'static str, value: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("constant input ({axis}) over indices {indices:?}")]
    ConstantInput {
        axis: &'static str,
        indices: Vec<usize>,
    },

    #[error("invalid configuration: {0}")]
    ConfigError(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::MissingFile { .. }
            | Error::MalformedHeader { .. }
            | Error::Malformed { .. }
            | Error::ShapeMismatch { .. }
            | Error::NonFiniteValue { .. }
            | Error::ZeroNormRow { .. }
            | Error::ZeroNorm
            | Error::InvariantViolation(_) => ErrorCategory::Data,
            Error::KOutOfRange { .. }
            | Error::IndexOutOfRange { .. }
            | Error::ConfigError(_)
            | Error::PreconditionViolation(_) => ErrorCategory::Config,
            Error::AllGroupsEmpty
            | Error::DomainError { .. }
            | Error::LengthMismatch { .. }
            | Error::TooFewPoints(_)
            | Error::ConstantInput { .. } => ErrorCategory::Metric,
            Error::Io { .. } => ErrorCategory::Io,
        }
    }

    /// Stable variant name, used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingFile { .. } => "MissingFile",
            Error::MalformedHeader { .. } => "MalformedHeader",
            Error::Malformed { .. } => "Malformed",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::ZeroNormRow { .. } => "ZeroNormRow",
            Error::ZeroNorm => "ZeroNorm",
            Error::InvariantViolation(_) => "InvariantViolation",
            Error::KOutOfRange { .. } => "KOutOfRange",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::AllGroupsEmpty => "AllGroupsEmpty",
            Error::DomainError { .. } => "DomainError",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::TooFewPoints(_) => "TooFewPoints",
            Error::ConstantInput { .. } => "ConstantInput",
            Error::ConfigError(_) => "ConfigError",
            Error::PreconditionViolation(_) => "PreconditionViolation",
            Error::Io { .. } => "IoError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn shape(what: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            what: what.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
