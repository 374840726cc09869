//! Calendar months as integer offsets from January 1996.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const EPOCH_YEAR: i32 = 1996;

/// A calendar month, stored as the number of months since 1996-01.
///
/// Offsets may be negative for months before the epoch. Formatting and
/// parsing use `YYYY-MM`; a trailing `-DD` is accepted and ignored when
/// parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth(i32);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid year-month {0:?} (expected YYYY-MM or YYYY-MM-DD)")]
pub struct ParseMonthError(pub String);

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        if !(1..=12).contains(&month) {
            return None;
        }
        Some(Self((year - EPOCH_YEAR) * 12 + month as i32 - 1))
    }

    pub const fn from_offset(offset: i32) -> Self {
        Self(offset)
    }

    pub const fn offset(self) -> i32 {
        self.0
    }

    pub fn year(self) -> i32 {
        EPOCH_YEAR + self.0.div_euclid(12)
    }

    /// Month of year, 1..=12.
    pub fn month(self) -> u32 {
        self.0.rem_euclid(12) as u32 + 1
    }

    pub fn plus(self, months: i32) -> Self {
        Self(self.0 + months)
    }

    /// Signed number of months from `earlier` to `self`.
    pub fn months_since(self, earlier: YearMonth) -> i32 {
        self.0 - earlier.0
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

impl FromStr for YearMonth {
    type Err = ParseMonthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMonthError(s.to_string());
        let trimmed = s.trim();
        let mut parts = trimmed.split('-');
        let year = parts.next().ok_or_else(err)?;
        let month = parts.next().ok_or_else(err)?;
        if let Some(day) = parts.next() {
            let day: u32 = day.parse().map_err(|_| err())?;
            if !(1..=31).contains(&day) || day.to_string().len() > 2 {
                return Err(err());
            }
        }
        if parts.next().is_some() || year.len() != 4 || month.len() != 2 {
            return Err(err());
        }
        let year: i32 = year.parse().map_err(|_| err())?;
        let month: u32 = month.parse().map_err(|_| err())?;
        YearMonth::new(year, month).ok_or_else(err)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
