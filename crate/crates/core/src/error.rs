use thiserror::Error;

/// Errors produced by the contract-design toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A structurally valid input carries a value that breaks an invariant.
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },

    /// Malformed JSON, with the location reported by the parser.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Numeric breakdown inside a solver.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A barrier evaluation was requested at a point on or outside a piece face.
    #[error("point is not strictly inside the piece (minimum slack {min_slack:e})")]
    InfeasiblePoint { min_slack: f64 },

    #[error("normalized utility is undefined for a zero oracle value (achieved {achieved})")]
    UndefinedRatio { achieved: f64 },

    /// A state that the algorithms guarantee cannot occur.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        if err.is_io() {
            return Error::Io(err.into());
        }
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
