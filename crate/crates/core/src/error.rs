use thiserror::Error;

/// Broad failure class, used by the runner to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input or a violated precondition.
    Input,
    /// A physically inadmissible combination (factor vs. potential, |γ| ≠ 1, ...).
    Physics,
    /// A numerical invariant was breached.
    Numerics,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("topological factor must be unimodular, got |γ| = {modulus}: the |ψ|² ansatz does not work otherwise")]
    NonUnimodular { modulus: f64 },

    #[error("group relation violated: {0}")]
    RelationViolated(String),

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("cover point sheet {sheet} lies outside the materialized window ±{window}")]
    OutOfWindow { sheet: i64, window: i64 },

    #[error("free-group word is not reduced at position {position}")]
    NonReducedWord { position: usize },

    #[error("free-group word length {len} exceeds cap {cap}")]
    WordTooLong { len: usize, cap: usize },

    #[error("deck elements belong to different groups: {0}")]
    MixedGroups(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("density is not deck-invariant (residual {residual:.3e}); |γ| ≠ 1 or corrupted state")]
    NonProjectable { residual: f64 },

    #[error("topological factor does not commute with every V(q) (residual {residual:.3e})")]
    Incompatible { residual: f64 },

    #[error("simultaneous diagonalization unavailable: {0}")]
    DecompositionUnavailable(String),

    #[error("dimension cap exceeded: {0}")]
    DimensionCap(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical invariant `{invariant}` breached: residual {residual:.3e} > {threshold:.3e}")]
    Numerics {
        invariant: String,
        residual: f64,
        threshold: f64,
    },

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonUnimodular { .. }
            | Error::RelationViolated(_)
            | Error::NotUnitary { .. }
            | Error::NotHermitian { .. }
            | Error::NonProjectable { .. }
            | Error::Incompatible { .. }
            | Error::DecompositionUnavailable(_) => ErrorKind::Physics,
            Error::Numerics { .. } => ErrorKind::Numerics,
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
