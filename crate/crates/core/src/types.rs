//! Identifier newtypes and the fixed-point data value carried through the protocol.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Index of an oracle node in `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

/// Index of a data source in `[0, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceId(pub usize);

/// Oracle task identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "O{}", self.0)
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}", self.0)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Number of decimal places in the canonical encoding of a [`DataValue`].
pub const VALUE_DECIMALS: u32 = 6;
const VALUE_SCALE: i64 = 10i64.pow(VALUE_DECIMALS);

/// A reported data value stored as signed micro-units.
///
/// Values are fixed-point so that the bytes fed to the signature digest are
/// identical on every platform. The canonical encoding is a decimal string with
/// exactly six fractional digits, e.g. `"-12.500000"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct DataValue(i64);

impl DataValue {
    pub const fn from_micros(micros: i64) -> Self {
        Self(micros)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    /// Rounds `x` to the nearest micro-unit.
    pub fn from_f64(x: f64) -> Self {
        Self((x * VALUE_SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / VALUE_SCALE as f64
    }

    pub fn offset(self, delta: DataValue) -> Self {
        Self(self.0 + delta.0)
    }

    /// Canonical decimal encoding used in message digests.
    pub fn canonical(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DataValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let scale = VALUE_SCALE as u64;
        write!(
            f,
            "{sign}{}.{:0width$}",
            abs / scale,
            abs % scale,
            width = VALUE_DECIMALS as usize
        )
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid data value {0:?}")]
pub struct ParseValueError(pub String);

impl FromStr for DataValue {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseValueError(s.to_string());
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() || frac.len() > VALUE_DECIMALS as usize {
            return Err(err());
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let int: i64 = int.parse().map_err(|_| err())?;
        let mut frac_val: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
        for _ in frac.len()..VALUE_DECIMALS as usize {
            frac_val *= 10;
        }
        let micros = int
            .checked_mul(VALUE_SCALE)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(err)?;
        Ok(Self(if neg { -micros } else { micros }))
    }
}

impl From<DataValue> for String {
    fn from(v: DataValue) -> Self {
        v.canonical()
    }
}

impl TryFrom<String> for DataValue {
    type Error = ParseValueError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
