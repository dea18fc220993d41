use thiserror::Error;

use crate::spectral::ZEigenpair;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported dimension n = {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: &'static str },

    /// The shifted power iteration ran out of iterations. Carries the best
    /// iterate seen so callers can still inspect it.
    #[error("Z-eigenpair iteration did not converge after {iterations} iterations (residual {:e})", best.residual)]
    NotConverged {
        iterations: usize,
        best: Box<ZEigenpair>,
    },

    /// Witness indices are stored 0-based and displayed 1-based.
    #[error("tensor of order {order} is reducible, witness index set {{{}}}", one_based(witness))]
    Reducible { order: usize, witness: Vec<usize> },

    #[error("condition violated: {0}")]
    ConditionViolated(String),

    #[error("the tensors have no common Perron-Z-eigenvector; the row-sum (box) certificate does not need one")]
    NoCommonEigenvector,

    #[error("point is not an equilibrium: residual {residual:e} exceeds tolerance {tol:e}")]
    NotEquilibrium { residual: f64, tol: f64 },

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that mean "the certificate or theorem does not apply"
    /// rather than "the input was malformed".
    pub fn is_condition(&self) -> bool {
        matches!(
            self,
            Error::ConditionViolated(_)
                | Error::Reducible { .. }
                | Error::NoCommonEigenvector
                | Error::NotConverged { .. }
                | Error::NotEquilibrium { .. }
        )
    }
}

fn one_based(witness: &[usize]) -> String {
    witness
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
