use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("kernel evaluated on the diagonal x = y")]
    Diagonal,
    #[error("sampling budget exhausted: {accepted} of {target} points after {failures} failed draws")]
    Budget {
        accepted: usize,
        target: usize,
        failures: usize,
    },
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no convergence in {what} (best residual {residual:e})")]
    NonConvergence { what: String, residual: f64 },
    #[error("interaction matrix is near singular (condition number {0:e})")]
    NearSingular(f64),
    #[error("grid geometry mismatch: {0}")]
    Geometry(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("tolerance {tol:e} not met, estimate {estimate} with error {error:e}")]
    Tolerance { estimate: f64, error: f64, tol: f64 },
    #[error("scatterer {index} lies within 2h of the grid boundary")]
    Interpolation { index: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
