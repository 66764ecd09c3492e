use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameters: {0}")]
    Validation(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown tracer `{0}` (expected one of v, T, q)")]
    UnknownTracer(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("elliptic solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("compatibility violated: right-hand side mean {mean:.3e} is not zero")]
    Compatibility { mean: f64 },

    #[error("time step {dt:.6e} exceeds the advective limit {limit:.6e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite value in `{field}` at flat index {index}")]
    NonFinite { field: &'static str, index: usize },

    #[error("insufficient trajectory storage: {0}")]
    InsufficientTrajectory(String),

    #[error("bad forcing expression `{expr}`: {msg}")]
    Forcing { expr: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Compatibility { .. }
                | Error::Cfl { .. }
                | Error::NonFinite { .. }
                | Error::InsufficientTrajectory(_)
        )
    }
}
