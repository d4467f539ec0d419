use std::path::PathBuf;

use thiserror::Error;

use crate::sweep::SolveResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The host population `S_h + I_h` was not positive where a force of
    /// infection had to be evaluated.
    #[error("nonpositive host population N_h = {n_h}")]
    NonpositivePopulation { n_h: f64 },

    #[error("state component {component} = {value} at t = {t} fell below the negativity floor {floor}")]
    NegativeState {
        t: f64,
        component: usize,
        value: f64,
        floor: f64,
    },

    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },

    #[error("solver did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<SolveResult>),

    #[error("invalid value for `{key}`: {constraint}")]
    InvariantViolation { key: String, constraint: String },

    #[error("zero-norm direction {index} in gradient check")]
    DegenerateDirection { index: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invariant(key: &str, constraint: impl Into<String>) -> Self {
        Error::InvariantViolation {
            key: key.to_string(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvariantViolation { .. } | Error::Parse { .. } | Error::UnknownKey(_) => 2,
            Error::Io { .. } | Error::MissingArtifact(_) => 4,
            _ => 3,
        }
    }
}
