use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("event scheduled at {fire_at} ms is before the current clock ({now} ms)")]
    InPast { fire_at: f64, now: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("spreading factor {0} is not in 7..=12")]
    SpreadingFactor(u8),
    #[error("bandwidth {0} kHz is not one of 125, 250, 500")]
    Bandwidth(u32),
    #[error("coding rate offset {0} is not in 1..=4")]
    CodingRate(u8),
    #[error("payload of {0} bytes exceeds the 255-byte LoRa limit")]
    PayloadTooLong(usize),
    #[error("preamble of {0} symbols is shorter than the minimum of 6")]
    PreambleTooShort(u16),
    #[error("no sensitivity entry for SF{sf} at {bw_khz} kHz")]
    MissingSensitivity { sf: u8, bw_khz: u32 },
    #[error("distance must be positive, got {0} m")]
    Distance(f64),
    #[error("invalid link model: {0}")]
    LinkModel(&'static str),
}

#[derive(Debug, Error, PartialEq)]
pub enum MacError {
    #[error("no supply current configured for {0} dBm")]
    MissingCurrent(i32),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

/// Problems with a scenario file or override.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for key `{key}`: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn value(key: &str, value: &str, reason: impl Into<String>) -> Self {
        ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.into(),
        }
    }

    /// The offending key, when the error is tied to one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(k) => Some(k),
            ConfigError::Value { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("no replications to write")]
    NoReplications,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
