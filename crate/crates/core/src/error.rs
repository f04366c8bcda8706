use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a distribution or formula.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The sample-size formula has a non-positive denominator.
    #[error(
        "infeasible sample size: |D| = {assumed_diff} must be smaller than the margin {margin}"
    )]
    Infeasible { assumed_diff: f64, margin: f64 },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "quadrature did not converge on [{lower}, {upper}]: estimate {estimate:.3e}, \
         error {error:.3e} after {intervals} subintervals"
    )]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("empty result set: nothing to emit")]
    EmptyResults,

    #[error("malformed result record: {0}")]
    Record(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
