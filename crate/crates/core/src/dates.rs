//! Half-open UTC date ranges used for tool windows and assessment intervals.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DateError {
    #[error("invalid date {0:?} (expected YYYY-MM-DD)")]
    InvalidDate(String),
    #[error("invalid date range {0:?} (expected YYYY-MM-DD..YYYY-MM-DD)")]
    InvalidRange(String),
    #[error("date range {0} ends before it starts")]
    Reversed(String),
}

/// Dates `start <= d < end`. A range with `start == end` is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, DateError> {
        if end < start {
            return Err(DateError::Reversed(format!("{start}..{end}")));
        }
        Ok(Self { start, end })
    }

    /// The single day `date`.
    pub fn day(date: NaiveDate) -> Self {
        Self {
            start: date,
            end: date + Days::new(1),
        }
    }

    /// `days` consecutive days starting at `start`.
    pub fn span(start: NaiveDate, days: u64) -> Self {
        Self {
            start,
            end: start + Days::new(days),
        }
    }

    /// The whole calendar year.
    pub fn year(year: i32) -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year"),
            end: NaiveDate::from_ymd_opt(year + 1, 1, 1).expect("valid year"),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date < self.end
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn len_days(&self) -> u64 {
        (self.end - self.start).num_days().max(0) as u64
    }

    pub fn overlaps(&self, other: &DateRange) -> bool {
        !self.is_empty() && !other.is_empty() && self.start < other.end && other.start < self.end
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        self.start.iter_days().take_while(move |d| *d < end)
    }

    /// Four 7-day windows, one per season, starting on the 15th of January,
    /// April, July and October.
    pub fn seasonal_windows(year: i32) -> Vec<DateRange> {
        [1, 4, 7, 10]
            .into_iter()
            .map(|month| {
                let start = NaiveDate::from_ymd_opt(year, month, 15).expect("valid date");
                DateRange::span(start, 7)
            })
            .collect()
    }

    pub fn within_year(&self, year: i32) -> bool {
        self.start.year() == year && (self.end - Days::new(1)).year() == year
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

pub fn parse_date(raw: &str) -> Result<NaiveDate, DateError> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
        .map_err(|_| DateError::InvalidDate(raw.to_string()))
}

impl FromStr for DateRange {
    type Err = DateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (start, end) = s
            .split_once("..")
            .ok_or_else(|| DateError::InvalidRange(s.to_string()))?;
        DateRange::new(parse_date(start)?, parse_date(end)?)
    }
}
