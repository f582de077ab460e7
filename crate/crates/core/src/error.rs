use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    /// The growth transition from a week with zero current incidence is undefined.
    #[error("gap week: current incidence is zero at observation {index}")]
    GapWeek { index: usize },

    #[error("posterior mass vanished after observation {index}; likelihood and prior are incompatible")]
    PosteriorUnderflow { index: usize },

    #[error("non-finite compartment state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("compartment {compartment} went negative ({value}) at t = {t}")]
    NegativeCompartment {
        compartment: &'static str,
        value: f64,
        t: f64,
    },

    #[error("serial interval discretization is degenerate: shape = {shape}, scale = {scale}, k = {k}")]
    DegenerateSerialInterval { shape: f64, scale: f64, k: usize },

    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("series is empty")]
    EmptySeries,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
