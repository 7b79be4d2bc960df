use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval: x1 = {x1} must be >= x2 = {x2}")]
    InvalidInterval { x1: String, x2: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot parse bias config `{input}`: {reason}")]
    BiasConfig { input: String, reason: String },

    #[error("cdf vanishes at x = {x}; ratio p/F undefined")]
    ZeroCdf { x: f64 },

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("row {row}: feasible bias interval [{lo}, {hi}] is empty")]
    InfeasibleRow { row: usize, lo: f64, hi: f64 },

    #[error("row {row}: density vanishes on the whole feasible interval [{lo}, {hi}]")]
    ZeroLikelihood { row: usize, lo: f64, hi: f64 },

    #[error("{matrix} is outside the feasible set at row {row}: {reason}")]
    Infeasible {
        matrix: &'static str,
        row: usize,
        reason: String,
    },

    #[error("bound is vacuous: {0}")]
    VacuousBound(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is rank deficient (smallest singular value {smallest:e})")]
    RankDeficient { smallest: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("refusing to overwrite existing results in {0} (pass --force)")]
    OutputExists(PathBuf),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
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
