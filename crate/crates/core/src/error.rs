use thiserror::Error;

/// Errors raised by packing construction, statistics and inference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("not enough spheres: need at least {needed}, have {have}")]
    TooFewSpheres { needed: usize, have: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("generator saturated after {attempts} attempts ({placed} of {target} placed)")]
    Saturated {
        attempts: usize,
        placed: usize,
        target: usize,
    },

    #[error("generator did not converge: {0}")]
    NonConvergence(String),

    #[error("event queue overflow: {0} pending events")]
    EventQueueOverflow(usize),

    #[error("triangulation does not match configuration: {0}")]
    TriangulationMismatch(String),

    #[error("estimator window problem: {0}")]
    Window(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("ensemble failed: {failed} of {total} realizations unusable (first: {first})")]
    EnsembleFailure {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("inference refused: {0}")]
    Refused(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}
