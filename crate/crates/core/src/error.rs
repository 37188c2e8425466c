use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration key is missing, unknown or violates an invariant.
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The solver was asked for a configuration it is not derived for
    /// (e.g. a detuned cavity).
    #[error("unsupported regime: {0}")]
    Unsupported(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error(
        "step size underflow at t = {t}: h = {step:e}, dominant error in component {component}"
    )]
    StepUnderflow {
        t: f64,
        step: f64,
        component: String,
    },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: u64 },

    #[error("quadrature did not converge: estimate {estimate}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unknown figure `{0}`")]
    UnknownFigure(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("manifest serialization failed: {0}")]
    Manifest(#[from] toml::ser::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
