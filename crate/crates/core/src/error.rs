use std::path::PathBuf;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative numerical method did not converge.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The exact result is not representable (e.g. a density pole).
    #[error("overflow: {0}")]
    Overflow(String),

    /// The quantity is mathematically undefined for this input (zero means, zero spread).
    #[error("undefined: {0}")]
    Undefined(String),

    /// Input carries no usable signal.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A derived measurement could not be extracted from the data.
    #[error("analysis error: {0}")]
    Analysis(String),

    /// Inconsistent or unsatisfiable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_frame(self, index: usize) -> Self {
        match self {
            e @ Error::Frame { .. } => e,
            e => Error::Frame {
                index,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {value}")))
    }
}

pub(crate) fn ensure_at_least_one(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and >= 1, got {value}")))
    }
}
