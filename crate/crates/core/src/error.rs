use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("`{name}` expects {expected} argument(s), got {found} (line {line}, column {column})")]
    Arity {
        name: String,
        expected: String,
        found: usize,
        line: usize,
        column: usize,
    },
    #[error("evaluation error in `{subexpr}`: {message}")]
    Eval { subexpr: String, message: String },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("capability error: {0}")]
    Capability(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("set is infeasible")]
    Infeasible,
    #[error("unboundedness check failed: {0}")]
    UnboundedCheck(String),
    #[error("estimate unavailable: {0}")]
    EstimateUnavailable(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("sampling failure: {0}")]
    Sampling(String),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("json error: {0}")]
    Json(String),
}

impl Error {
    /// Short tag naming the module family that raised the error.
    pub fn provenance(&self) -> &'static str {
        match self {
            Error::Syntax { .. } | Error::UnknownIdentifier { .. } | Error::Arity { .. } => {
                "function-model/parse"
            }
            Error::Eval { .. } => "function-model/eval",
            Error::DimensionMismatch { .. } | Error::Lp(_) => "core-geometry",
            Error::Capability(_) => "capability",
            Error::Infeasible | Error::UnboundedCheck(_) => "cones-at-infinity",
            Error::EstimateUnavailable(_) | Error::Sampling(_) => "asymptotic-estimators",
            Error::Inconclusive(_) => "inconclusive",
            Error::Invalid(_) | Error::Io(_) | Error::Json(_) => "cli-report",
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. } | Error::UnknownIdentifier { .. } | Error::Arity { .. } => 2,
            Error::Invalid(_) | Error::Json(_) | Error::Io(_) => 2,
            Error::Capability(_) => 3,
            Error::Inconclusive(_) | Error::EstimateUnavailable(_) | Error::Sampling(_) => 4,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
