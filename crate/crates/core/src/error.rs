//! Error types shared across the planner.

use std::io;
use thiserror::Error;

/// Errors produced by the planning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (non-finite value, negative mass, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A foot support polygon is unusable (too few vertices, collinear, wrong winding).
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    /// A scenario or problem definition is structurally inconsistent.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// An evaluation produced non-finite values that could not be recovered.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Forward integration left the finite domain.
    #[error("trajectory diverged at t = {time:.6} s")]
    Divergence { time: f64 },

    /// A scenario document failed validation; `path` names the offending field.
    #[error("scenario field `{path}`: {message}")]
    Scenario { path: String, message: String },

    /// A document could not be parsed at all.
    #[error("parse error: {0}")]
    Parse(String),

    /// A comparison experiment could not produce a verdict.
    #[error("experiment inconclusive: {0}")]
    Inconclusive(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    pub(crate) fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
