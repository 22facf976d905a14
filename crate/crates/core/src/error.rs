use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure mode surfaced by the library and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("support mismatch: {left} vs {right} entries")]
    SupportMismatch { left: usize, right: usize },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("conditioning on a zero-mass value (column {index})")]
    ZeroMarginal { index: usize },

    #[error("ensemble of {size} atoms exceeds the cap of {cap}")]
    EnsembleTooLarge { size: u128, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("noise law is not centered (outcome {outcome}, mean {mean} grid units)")]
    NoiseNotCentered { outcome: usize, mean: f64 },

    #[error("value leaves the representable grid: {0}")]
    GridOverflow(String),

    #[error("channel does not match prior: {0}")]
    ChannelPriorMismatch(String),

    #[error("environment row for policy {policy} is not in the catalog")]
    RowNotInCatalog { policy: usize },

    #[error("mode unsupported: {0}")]
    ModeUnsupported(String),

    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),

    #[error("weight {weight} at position {index} exceeds the cap {cap}")]
    CapViolated { index: usize, weight: f64, cap: f64 },

    #[error("sequence increases at position {index}")]
    NotMonotone { index: usize },

    #[error("channel is not coherent (residual {residual:e})")]
    NotCoherent { residual: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("channel was not built by the independent-noise constructor")]
    NotNoiseChannel,

    #[error("encoder is not injective: atoms {first} and {second} share a codeword")]
    NotInjective { first: usize, second: usize },

    #[error("instance generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("malformed csv: {0}")]
    MalformedCsv(String),

    #[error("config error: {0}")]
    ConfigError(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
