//! Error type shared across the library.

use std::fmt;

/// Errors produced by scenario construction, the probability model, and the
/// pattern solvers.
#[derive(Debug)]
pub enum Error {
    /// A scenario field violates its invariant (named field + explanation).
    Validation { field: String, message: String },
    /// A cell sees the satellite at or below the horizon.
    BelowHorizon { cell: usize },
    /// SINR cannot exceed the threshold for this cell even without
    /// interference (g_ii * rho <= gamma_th).
    DecodingInfeasible { cell: usize },
    /// The instance cannot satisfy the pattern constraints
    /// (e.g. more cells than beam-slots).
    Infeasible(String),
    /// Matrix/vector dimensions do not line up.
    DimensionMismatch(String),
    /// Function argument outside its mathematical domain.
    Domain(String),
    /// A and -B share an eigenvalue; the Sylvester equation is singular.
    SingularSystem,
    /// A linear solve produced a residual above the accepted bound.
    SolverResidual { residual: f64, bound: f64 },
    /// Instance exceeds an enumeration/density limit.
    InstanceTooLarge(String),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Validation { field, message } => write!(f, "invalid `{field}`: {message}"),
            Error::BelowHorizon { cell } => {
                write!(f, "cell {cell} is below the horizon as seen from the satellite")
            }
            Error::DecodingInfeasible { cell } => write!(
                f,
                "decoding infeasible for cell {cell}: g_ii * rho does not exceed gamma_th"
            ),
            Error::Infeasible(msg) => write!(f, "infeasible instance: {msg}"),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::SingularSystem => {
                write!(f, "singular Sylvester system: spectra of A and -B overlap")
            }
            Error::SolverResidual { residual, bound } => {
                write!(f, "solve residual {residual:.3e} exceeds bound {bound:.3e}")
            }
            Error::InstanceTooLarge(msg) => write!(f, "instance too large: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Json(e) => write!(f, "parse error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
