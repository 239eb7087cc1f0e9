use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const TEXT_FORMAT: &str = "%Y-%m-%d-%H-%M-%S";

/// Whole seconds since 1970-01-01-00-00-00 UTC.
///
/// Bounded above by 9999-12-31-23-59-59 so the text form always has a
/// four-digit year.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(u64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimestampError {
    #[error("timestamp {0} s is past 9999-12-31-23-59-59")]
    OutOfRange(u64),
    #[error("cannot parse {0:?} as yyyy-mm-dd-hh-mm-ss")]
    Malformed(String),
}

impl Timestamp {
    pub const MAX_SECONDS: u64 = 253_402_300_799;
    pub const EPOCH: Timestamp = Timestamp(0);

    pub fn from_seconds(seconds: u64) -> Result<Self, TimestampError> {
        if seconds > Self::MAX_SECONDS {
            return Err(TimestampError::OutOfRange(seconds));
        }
        Ok(Timestamp(seconds))
    }

    pub const fn seconds(&self) -> u64 {
        self.0
    }

    /// Adds `delta` seconds, saturating at the upper bound.
    pub fn plus(&self, delta: u64) -> Timestamp {
        Timestamp(self.0.saturating_add(delta).min(Self::MAX_SECONDS))
    }

    pub fn parse(text: &str) -> Result<Self, TimestampError> {
        let malformed = || TimestampError::Malformed(text.to_owned());
        // chrono tolerates missing zero padding; the canonical form does not.
        if text.len() != 19 {
            return Err(malformed());
        }
        let naive = NaiveDateTime::parse_from_str(text, TEXT_FORMAT).map_err(|_| malformed())?;
        let secs = naive.and_utc().timestamp();
        if secs < 0 {
            return Err(malformed());
        }
        Timestamp::from_seconds(secs as u64)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // In range by construction.
        let dt = DateTime::from_timestamp(self.0 as i64, 0).ok_or(fmt::Error)?;
        write!(f, "{}", dt.format(TEXT_FORMAT))
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Timestamp::parse(&text).map_err(serde::de::Error::custom)
    }
}
