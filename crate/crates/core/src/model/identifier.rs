use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Byte lengths of the five hyphen-separated groups of the text form.
const GROUP_LENGTHS: [usize; 5] = [8, 4, 4, 4, 12];

/// 128-bit globally unique identifier shared by entities and trackers.
#[derive(Copy, Clone, Eq, PartialEq, Ord, PartialOrd, Hash, Default)]
pub struct Guid(u128);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed GUID {text:?}: {reason}")]
pub struct MalformedGuid {
    pub text: String,
    pub reason: &'static str,
}

impl Guid {
    pub const NIL: Guid = Guid(0);

    pub const fn from_u128(value: u128) -> Self {
        Guid(value)
    }

    pub const fn as_u128(&self) -> u128 {
        self.0
    }

    pub const fn from_bytes(bytes: [u8; 16]) -> Self {
        Guid(u128::from_be_bytes(bytes))
    }

    /// Big-endian byte image, the order used on the wire.
    pub const fn to_bytes(&self) -> [u8; 16] {
        self.0.to_be_bytes()
    }

    /// The 16 most significant bits of `time-low`.
    pub const fn preamble(&self) -> u16 {
        (self.0 >> 112) as u16
    }

    /// Parses the 8-4-4-4-12 text form. Hex digits may be either case.
    pub fn parse(text: &str) -> Result<Self, MalformedGuid> {
        let fail = |reason| MalformedGuid {
            text: text.to_owned(),
            reason,
        };
        if !text.is_ascii() {
            return Err(fail("non-ASCII character"));
        }
        let groups: Vec<&str> = text.split('-').collect();
        if groups.len() != GROUP_LENGTHS.len() {
            return Err(fail("expected exactly four hyphens"));
        }
        let mut value: u128 = 0;
        for (group, &len) in groups.iter().zip(GROUP_LENGTHS.iter()) {
            if group.len() != len {
                return Err(fail("wrong group length"));
            }
            for c in group.chars() {
                let digit = c.to_digit(16).ok_or_else(|| fail("non-hex digit"))?;
                value = (value << 4) | digit as u128;
            }
        }
        Ok(Guid(value))
    }
}

impl fmt::Display for Guid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = format!("{:032x}", self.0);
        write!(
            f,
            "{}-{}-{}-{}-{}",
            &h[0..8],
            &h[8..12],
            &h[12..16],
            &h[16..20],
            &h[20..32]
        )
    }
}

impl fmt::Debug for Guid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Guid({self})")
    }
}

impl FromStr for Guid {
    type Err = MalformedGuid;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Guid::parse(s)
    }
}

impl Serialize for Guid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Guid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Guid::parse(&text).map_err(serde::de::Error::custom)
    }
}
