use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated the domain of the operation.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch in {context}: expected {expected}, got {actual}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The damage Newton loop did not reach the residual tolerance.
    #[error("damage iteration did not converge after {iterations} iterations (last iterate {last})")]
    NonConvergence { iterations: usize, last: f64 },

    /// Damage reached the failure cutoff; the material point has lost its load capacity.
    #[error("material failure: damage reached {damage}")]
    MaterialFailure { damage: f64 },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
