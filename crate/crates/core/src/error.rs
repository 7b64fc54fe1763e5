use alloc::string::String;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty sample set")]
    EmptySamples,
    #[error("invalid percentile list: {0}")]
    InvalidPercentiles(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("constellations were built with different normalization bounds")]
    BoundsMismatch,
    #[error("cache {0} is clustered but has no features")]
    MissingFeatures(String),
    #[error("cache {0} is clustered but has no ground-truth label")]
    MissingLabel(String),
    #[error("invalid flow record: {0}")]
    InvalidRecord(String),
    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least two snapshots, got {0}")]
    TooFewSnapshots(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
