use std::path::PathBuf;

/// Errors produced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("agent state has dimension {found}, model `{model}` expects {expected}")]
    DimensionMismatch {
        model: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("CFL condition violated: dt = {dt:e} exceeds the stable limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-positive or non-finite characteristic speed {0}")]
    InvalidSpeed(f64),

    #[error("flux speed bound too small: sampled |d f/d rho| = {sampled} > declared {declared}")]
    SpeedBound { sampled: f64, declared: f64 },

    #[error("non-finite agent velocity at t = {t}: p = {state:?}, phi = {velocity:?}")]
    NonFiniteAgent {
        t: f64,
        state: Vec<f64>,
        velocity: Vec<f64>,
    },

    #[error("non-finite density at t = {t}")]
    NonFiniteDensity { t: f64 },

    #[error("density reached the boundary band at t = {t} (max {value:e} within {cells} cells of the edge)")]
    MarginViolation { t: f64, value: f64, cells: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
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
