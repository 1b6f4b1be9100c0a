use std::path::PathBuf;

use crate::bounds::BoundKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix entry at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is singular to working precision (pivot {pivot} at step {step})")]
    Singular { step: usize, pivot: f64 },

    #[error("{what} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        what: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("invalid factorization: n = {n} is not {n_hat} * {n_tilde}")]
    InvalidFactorization {
        n: usize,
        n_hat: usize,
        n_tilde: usize,
    },

    #[error("size guard exceeded: {what} = {value} > {limit}")]
    SizeGuard {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{kind:?} requires parameter `{name}`")]
    MissingParameter { kind: BoundKind, name: &'static str },

    #[error("{kind:?} is outside its validity region: requires {condition}")]
    OutOfValidityRegion {
        kind: BoundKind,
        condition: &'static str,
    },

    #[error("{kind:?} does not describe a probability")]
    NotAProbability { kind: BoundKind },

    #[error("target failure probability {target} is unreachable for {kind:?} within its validity region")]
    Unreachable { kind: BoundKind, target: f64 },

    #[error("incompatible certificate: {0}")]
    IncompatibleCertificate(String),

    #[error("trace estimation requires a positive semi-definite operator (use a Gram operator or assert PSD)")]
    PsdNotAsserted,

    #[error("power iteration did not converge in {iterations} iterations (best estimate {estimate})")]
    NotConverged { iterations: usize, estimate: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported Matrix Market format: {0}")]
    UnsupportedFormat(String),

    #[error("missing reference value for {0}")]
    MissingReference(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn mismatch(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
