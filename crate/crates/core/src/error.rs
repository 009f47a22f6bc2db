use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("frequency {frequency_hz:e} Hz outside absorption table range [{min_hz:e}, {max_hz:e}] Hz")]
    FrequencyOutOfRange {
        frequency_hz: f64,
        min_hz: f64,
        max_hz: f64,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("absorption table: {0}")]
    Validation(String),

    #[error("no propagation path: link is in outage")]
    NoPath,

    #[error("not enough sub-windows: {unassigned_count} link(s) unassigned: {unassigned:?}")]
    Capacity {
        unassigned_count: usize,
        unassigned: Vec<u32>,
    },

    #[error("{}: {source}", path.display())]
    Load {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn at_path(self, path: impl Into<PathBuf>) -> Self {
        Error::Load {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
