use thiserror::Error;

use crate::spectral::SpectralResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains non-finite entries or is not square")]
    InvalidMatrix,

    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid cluster count {k} for {n} observations")]
    InvalidK { k: usize, n: usize },

    #[error("vector is not unit norm (norm = {0})")]
    NotNormalized(f64),

    #[error("empty data: total count is zero")]
    EmptyData,

    #[error("projected data has zero spread along dimension {0}")]
    DegenerateProjection(usize),

    #[error("graph has a vertex with zero degree")]
    DegenerateGraph,

    #[error("need at least {needed} elements, got {got}")]
    TooSmall { needed: usize, got: usize },

    /// λ₂ is repeated; the payload carries the eigenvector block for the
    /// nonsmooth step.
    #[error("second eigenvalue has multiplicity {}", .0.multiplicity)]
    NonSimpleEigenvalue(Box<SpectralResult>),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ingest error at row {row}, column {column}: {message}")]
    Ingest {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
