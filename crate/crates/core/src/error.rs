use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A geometric parameter combination that cannot be realized. `key` names
    /// the offending parameter so callers can map it back to configuration.
    #[error("infeasible geometry ({key}): {reason}")]
    Geometry { key: &'static str, reason: String },

    #[error("mesh validation failed: {0}")]
    Mesh(String),

    #[error("region is empty: {0}")]
    EmptyRegion(String),

    #[error("conductivity rejected ({key}): {reason}")]
    Conductivity { key: &'static str, reason: String },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solve failed for basis function {index}: {source}")]
    BasisSolve {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("point rejected: {0}")]
    Point(String),

    #[error("kernel samples missing at surface nodes {nodes:?}")]
    MissingSamples { nodes: Vec<usize> },

    #[error("too many degrees of freedom on {tag}: {count} > cap {cap}")]
    TooManyDofs { tag: String, count: usize, cap: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("invalid configuration ({key}): {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn geometry(key: &'static str, reason: impl Into<String>) -> Self {
        Error::Geometry { key, reason: reason.into() }
    }

    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse { line, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
