use std::path::PathBuf;

use crate::series::ChannelId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("time series must have at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("time series has no channels")]
    NoChannels,
    #[error("column {channel} has length {got}, expected {expected}")]
    RaggedColumns {
        channel: usize,
        expected: usize,
        got: usize,
    },
    #[error("channel {0} has zero variance")]
    ZeroVariance(ChannelId),
    #[error("non-finite value in channel {channel} at t={t}")]
    NonFinite { channel: ChannelId, t: usize },
    #[error("duplicate channel {0}")]
    DuplicateChannel(ChannelId),
    #[error("channel index {index} out of range for {n} channels")]
    ChannelOutOfRange { index: usize, n: usize },
    #[error("invalid channel subset: {0}")]
    InvalidSubset(String),
    #[error("covariance is singular even after ridge {ridge:e}")]
    SingularCovariance { ridge: f64 },
    #[error("conditioning set of size {cond} too large for {samples} samples")]
    ConditionSetTooLarge { cond: usize, samples: usize },
    #[error("argument {0} is outside the domain of the function")]
    DomainError(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty histogram")]
    EmptyHistogram,
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("coupling matrix has spectral radius {0} >= 1")]
    UnstableSpec(f64),
    #[error("coupling graph contains a cycle")]
    CyclicGraph,
    #[error("grid has no {axis} channel for sensor {sensor}")]
    MissingChannel { sensor: u32, axis: crate::series::Axis },
    #[error("edge sets differ between MI maps")]
    EdgeSetMismatch,
    #[error("node sets differ between networks")]
    NodeSetMismatch,
    #[error("invalid grid layout: {0}")]
    InvalidGrid(String),
    #[error("inference failed for {} target(s): {}", .0.len(), format_failures(.0))]
    TargetFailures(Vec<(ChannelId, String)>),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("file {0} is empty")]
    EmptyFile(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_failures(failures: &[(ChannelId, String)]) -> String {
    failures
        .iter()
        .map(|(c, e)| format!("{c}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::NoChannels => "no_channels",
            Error::RaggedColumns { .. } => "ragged_columns",
            Error::ZeroVariance(_) => "zero_variance",
            Error::NonFinite { .. } => "non_finite",
            Error::DuplicateChannel(_) => "duplicate_channel",
            Error::ChannelOutOfRange { .. } => "channel_out_of_range",
            Error::InvalidSubset(_) => "invalid_subset",
            Error::SingularCovariance { .. } => "singular_covariance",
            Error::ConditionSetTooLarge { .. } => "condition_set_too_large",
            Error::DomainError(_) => "domain_error",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyHistogram => "empty_histogram",
            Error::InvalidHistogram(_) => "invalid_histogram",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnstableSpec(_) => "unstable_spec",
            Error::CyclicGraph => "cyclic_graph",
            Error::MissingChannel { .. } => "missing_channel",
            Error::EdgeSetMismatch => "edge_set_mismatch",
            Error::NodeSetMismatch => "node_set_mismatch",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::TargetFailures(_) => "target_failures",
            Error::Parse { .. } => "parse_error",
            Error::EmptyFile(_) => "empty_file",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
