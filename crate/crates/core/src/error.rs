use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("subchannel s({f},{k}) outside a {sub_bands}x{subframes} grid")]
    OutOfGrid {
        f: u32,
        k: u32,
        sub_bands: u32,
        subframes: u32,
    },

    #[error("flat index {index} out of range (grid has {len} subchannels)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{what} must be {expected}, got {got}")]
    Domain {
        what: &'static str,
        expected: &'static str,
        got: f64,
    },

    #[error("empty candidate set")]
    NoCandidates,

    #[error("awareness distance {0} m is not configured")]
    UnknownDistance(f64),

    #[error("{path}: row {row}: {reason}")]
    Trace {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(what: &'static str, expected: &'static str, got: f64) -> Self {
        Error::Domain { what, expected, got }
    }
}
