//! Calendar spans used for temporal windows and time slicing.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Days, Months, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpanError {
    #[error("span length must be at least 1")]
    Zero,
    #[error("cannot parse span {0:?}; expected <n>d, <n>m or <n>y")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Days,
    Months,
    Years,
}

/// A positive calendar length such as "6 months" or "1 year".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Span {
    count: u32,
    unit: Unit,
}

impl Span {
    pub fn new(count: u32, unit: Unit) -> Result<Self, SpanError> {
        if count == 0 {
            return Err(SpanError::Zero);
        }
        Ok(Span { count, unit })
    }

    pub fn days(count: u32) -> Result<Self, SpanError> {
        Span::new(count, Unit::Days)
    }

    pub fn months(count: u32) -> Result<Self, SpanError> {
        Span::new(count, Unit::Months)
    }

    pub fn years(count: u32) -> Result<Self, SpanError> {
        Span::new(count, Unit::Years)
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    /// `date - span`, saturating at the minimum representable date.
    pub fn before(&self, date: NaiveDate) -> NaiveDate {
        match self.unit {
            Unit::Days => date.checked_sub_days(Days::new(u64::from(self.count))),
            Unit::Months => date.checked_sub_months(Months::new(self.count)),
            Unit::Years => date.checked_sub_months(Months::new(self.count.saturating_mul(12))),
        }
        .unwrap_or(NaiveDate::MIN)
    }

    /// `date + span`, saturating at the maximum representable date.
    pub fn after(&self, date: NaiveDate) -> NaiveDate {
        match self.unit {
            Unit::Days => date.checked_add_days(Days::new(u64::from(self.count))),
            Unit::Months => date.checked_add_months(Months::new(self.count)),
            Unit::Years => date.checked_add_months(Months::new(self.count.saturating_mul(12))),
        }
        .unwrap_or(NaiveDate::MAX)
    }

    /// Zero-based index of the span-sized bucket holding `date`, counting from
    /// the bucket that starts at `origin` (which must not be after `date`).
    pub(crate) fn bucket(&self, origin: NaiveDate, date: NaiveDate) -> u64 {
        let n = u64::from(self.count);
        match self.unit {
            Unit::Days => (date - origin).num_days().max(0) as u64 / n,
            Unit::Months => months_between(origin, date) / n,
            Unit::Years => (date.year() - origin.year()).max(0) as u64 / n,
        }
    }

    /// Start date of bucket `index` (see [`Span::bucket`]).
    pub(crate) fn bucket_start(&self, origin: NaiveDate, index: u64) -> NaiveDate {
        let steps = index.saturating_mul(u64::from(self.count));
        let steps32 = u32::try_from(steps).unwrap_or(u32::MAX);
        match self.unit {
            Unit::Days => origin.checked_add_days(Days::new(steps)),
            Unit::Months => origin.checked_add_months(Months::new(steps32)),
            Unit::Years => origin.checked_add_months(Months::new(steps32.saturating_mul(12))),
        }
        .unwrap_or(NaiveDate::MAX)
    }

    /// The aligned origin for bucketing dates starting at `first`.
    pub(crate) fn origin(&self, first: NaiveDate) -> NaiveDate {
        match self.unit {
            Unit::Days => first,
            Unit::Months => {
                NaiveDate::from_ymd_opt(first.year(), first.month(), 1).unwrap_or(first)
            }
            Unit::Years => NaiveDate::from_ymd_opt(first.year(), 1, 1).unwrap_or(first),
        }
    }
}

fn months_between(origin: NaiveDate, date: NaiveDate) -> u64 {
    let m = (date.year() - origin.year()) * 12 + date.month() as i32 - origin.month() as i32;
    m.max(0) as u64
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = match self.unit {
            Unit::Days => 'd',
            Unit::Months => 'm',
            Unit::Years => 'y',
        };
        write!(f, "{}{}", self.count, suffix)
    }
}

impl FromStr for Span {
    type Err = SpanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || SpanError::Parse(s.to_string());
        let split = s.find(|c: char| !c.is_ascii_digit()).ok_or_else(err)?;
        let (num, unit) = s.split_at(split);
        let count: u32 = num.parse().map_err(|_| err())?;
        let unit = match unit.trim() {
            "d" | "day" | "days" => Unit::Days,
            "m" | "month" | "months" => Unit::Months,
            "y" | "year" | "years" => Unit::Years,
            _ => return Err(err()),
        };
        Span::new(count, unit)
    }
}

impl TryFrom<String> for Span {
    type Error = SpanError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Span> for String {
    fn from(s: Span) -> String {
        s.to_string()
    }
}

/// A symmetric window around an anchor date, or no restriction at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Window {
    Around(Span),
    Unbounded,
}

impl Window {
    /// Inclusive date bounds around `anchor`.
    pub fn bounds(&self, anchor: NaiveDate) -> (NaiveDate, NaiveDate) {
        match self {
            Window::Around(span) => (span.before(anchor), span.after(anchor)),
            Window::Unbounded => (NaiveDate::MIN, NaiveDate::MAX),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Around(s) => write!(f, "{s}"),
            Window::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for Window {
    type Err = SpanError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "unbounded" => Ok(Window::Unbounded),
            other => other.parse().map(Window::Around),
        }
    }
}

impl TryFrom<String> for Window {
    type Error = SpanError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Window> for String {
    fn from(w: Window) -> String {
        w.to_string()
    }
}
