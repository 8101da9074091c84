use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("spectral derivative order must lie in 1..=4, got {0}")]
    InvalidDerivativeOrder(u32),

    #[error("block shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("transpose companion variants require mu3 = 0 (got mu3 = {mu3})")]
    TransposeVariantRequiresZeroMu3 { mu3: num_complex::Complex64 },

    #[error("dispersion coefficients violate the dispersion property (mu2, mu4 must be imaginary and mu3 real)")]
    DispersionPropertyViolated,

    /// `det(id + Q)` fell below the solvability threshold. The canonical
    /// coordinate patch is no longer usable at this `(x, t)`.
    #[error("near-singular operator id + Q at x = {x}, t = {t}: |det| = {det_abs:.3e}")]
    NearSingularOperator { x: f64, t: f64, det_abs: f64 },

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("could not parse configuration: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse(_) | Error::InvalidGrid(_) => 2,
            Error::TransposeVariantRequiresZeroMu3 { .. } | Error::DispersionPropertyViolated => 2,
            Error::NearSingularOperator { .. } => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
