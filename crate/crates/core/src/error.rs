use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("channel index {index} out of range for {n_channels} channels")]
    ChannelOutOfRange { index: usize, n_channels: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite gradient or TD error during update")]
    Diverged,

    #[error("architecture mismatch: expected {expected:?}, got {got:?}")]
    ArchitectureMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient observations: transition matrix of order {order} has no counts")]
    InsufficientObservation { order: usize },

    #[error("trace too short: need {needed} slots, got {got}")]
    TraceTooShort { needed: usize, got: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u8, found: u8 },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case tag for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ChannelOutOfRange { .. } => "channel_out_of_range",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Diverged => "diverged",
            Error::ArchitectureMismatch { .. } => "architecture_mismatch",
            Error::InvalidProbabilities(_) => "invalid_probabilities",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InsufficientObservation { .. } => "insufficient_observation",
            Error::TraceTooShort { .. } => "trace_too_short",
            Error::EmptySeries => "empty_series",
            Error::Malformed(_) => "malformed",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::UnknownScenario(_) => "unknown_scenario",
            Error::MissingCheckpoint(_) => "missing_checkpoint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
