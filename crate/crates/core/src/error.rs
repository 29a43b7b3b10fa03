use thiserror::Error;

/// Errors raised by the inference routines and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("posterior outside the natural parameter space: {0}")]
    PosteriorImproper(String),
    #[error("inverse-Wishart mean undefined for dof {dof} in dimension {dim} (needs dof > 2d+2)")]
    MeanUndefined { dof: f64, dim: usize },
    #[error("block layout mismatch: {0}")]
    SchemaMismatch(String),
    #[error("all importance weights underflowed")]
    DegenerateWeights,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
