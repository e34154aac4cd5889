use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller broke a structural precondition (shape, symmetry).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix `{matrix}` is not positive definite")]
    Singular { matrix: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("no usable mode: every eigenmode has zero gain")]
    NoUsableMode,

    #[error("degenerate precoder: block diagonalization removed all transmit energy")]
    DegeneratePrecoder,
}

impl Error {
    /// Attach a human-readable name to a singularity error raised by a kernel.
    pub fn named(self, name: &str) -> Self {
        match self {
            Error::Singular { .. } => Error::Singular {
                matrix: name.to_string(),
            },
            other => other,
        }
    }

    /// True for failures of the numerical pipeline as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::NoUsableMode | Error::DegeneratePrecoder
        )
    }
}
