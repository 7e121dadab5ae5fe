use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot convert {from} to {to}: incompatible dimensions")]
    Unit { from: String, to: String },

    #[error("direction is not a unit vector (|khat| = {norm})")]
    InvalidDirection { norm: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("fit did not converge after {iterations} iterations: {diagnostics}")]
    FitNonConvergence { iterations: usize, diagnostics: String },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("extrapolation did not converge; trace: {trace}")]
    Extrapolation { trace: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {path}: {reason}")]
    Parse { path: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
