use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::iso;

/// ISO 3166-1 alpha-3 country code, stored lowercase (`"deu"`, `"bra"`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown country code {0:?}")]
pub struct UnknownCountryCode(pub String);

impl CountryCode {
    /// Accepts alpha-2 or alpha-3 input in any case and normalizes to
    /// lowercase alpha-3.
    pub fn parse(code: &str) -> Result<Self, UnknownCountryCode> {
        let trimmed = code.trim();
        let alpha3 = match trimmed.len() {
            2 => iso::alpha3_for_alpha2(trimmed),
            3 if trimmed.is_ascii() && iso::is_known_alpha3(trimmed) => Some(trimmed),
            _ => None,
        };
        alpha3
            .map(|c| CountryCode(c.to_ascii_lowercase()))
            .ok_or_else(|| UnknownCountryCode(code.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for CountryCode {
    type Err = UnknownCountryCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CountryCode::parse(s)
    }
}

impl Serialize for CountryCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        CountryCode::parse(&raw).map_err(serde::de::Error::custom)
    }
}
