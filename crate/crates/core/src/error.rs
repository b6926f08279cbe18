use thiserror::Error;

/// Errors raised across the library.
///
/// Variants map onto the failure classes the runner turns into exit codes,
/// see [`Error::kind`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent p = {0}: expected a finite p >= 1")]
    InvalidExponent(f64),

    #[error("unsupported exponent p = {0}: this branch requires p > 1")]
    UnsupportedBranch(f64),

    #[error("invalid breakpoints: {0}")]
    InvalidBreakpoints(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("resolution exceeded: {what} needs {needed}, limit is {limit}")]
    Resolution {
        what: String,
        needed: usize,
        limit: usize,
    },

    #[error("evaluation produced a non-finite value at {0}")]
    Evaluation(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("constraint c^p >= E[int |r|^p dxi] violated: c^p = {c_pow}, moment = {moment}")]
    ConstraintViolation { c_pow: f64, moment: f64 },

    #[error("random measure puts mass {0} at the points at infinity")]
    NotOnRealLine(f64),

    #[error("mixture weights are not rational with denominator <= {max_denominator}: {detail}")]
    UnsupportedWeights {
        max_denominator: u64,
        detail: String,
    },

    #[error("outside the domain K: {0}")]
    Domain(String),

    #[error("budget exceeded: {0}")]
    Budget(String),
}

/// Coarse classification of [`Error`], used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Resolution,
    Contract,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Resolution { .. } | Error::Budget(_) => ErrorKind::Resolution,
            Error::InvalidExponent(_)
            | Error::UnsupportedBranch(_)
            | Error::InvalidBreakpoints(_)
            | Error::NonFinite(_)
            | Error::UnsupportedWeights { .. } => ErrorKind::Input,
            Error::Evaluation(_)
            | Error::Contract(_)
            | Error::ConstraintViolation { .. }
            | Error::NotOnRealLine(_)
            | Error::Domain(_) => ErrorKind::Contract,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
