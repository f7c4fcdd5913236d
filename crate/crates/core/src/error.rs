use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel width {0} MHz (expected 20, 40, 80 or 160)")]
    InvalidWidth(u32),
    #[error("invalid MCS index {0} (expected 0..=11)")]
    InvalidMcs(u8),
    #[error("invalid guard interval {0} ns (expected 800, 1600 or 3200)")]
    InvalidGuardInterval(u32),
    #[error("transmit power {0} dBm outside [-20, 20]")]
    InvalidTxPower(f64),
    #[error("channel {number} is not a {width} MHz channel of the 5 GHz plan")]
    InvalidChannel { number: u16, width: u32 },
    #[error("unknown setting {0:?} (expected 2-100-6, 4-100-4 or 6-100-2)")]
    UnknownSetting(String),
    #[error("unknown strategy {0:?} (expected single, static or dynamic)")]
    UnknownStrategy(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user configuration rather than the environment.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Csv(_))
    }
}
