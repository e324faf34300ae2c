//! Day-resolution timestamps and the small date grammar shared by object
//! normalization and the temporal tagger.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use chrono::{Datelike, Duration, NaiveDate};
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A UTC calendar day. Finer timestamps are truncated on parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Day(NaiveDate);

impl Day {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Day> {
        NaiveDate::from_ymd_opt(year, month, day).map(Day)
    }

    pub fn date(self) -> NaiveDate {
        self.0
    }

    pub fn year(self) -> i32 {
        self.0.year()
    }

    pub fn plus_days(self, days: i64) -> Day {
        Day(self.0 + Duration::days(days))
    }

    /// Signed number of days from `other` to `self`.
    pub fn days_since(self, other: Day) -> i64 {
        (self.0 - other.0).num_days()
    }

    pub fn today() -> Day {
        Day(chrono::Utc::now().date_naive())
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for Day {
    type Err = Error;

    /// Accepts `YYYY-MM-DD` optionally followed by a time part
    /// (`T...` or ` ...`), which is discarded.
    fn from_str(s: &str) -> Result<Day> {
        let s = s.trim();
        let head = s.split(['T', ' ']).next().unwrap_or(s);
        NaiveDate::parse_from_str(head, "%Y-%m-%d")
            .map(Day)
            .map_err(|_| Error::InvalidInput(format!("unparseable date {s:?}")))
    }
}

impl Serialize for Day {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Day {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Day, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// End of a half-open interval: a finite day or `OPEN` (+inf).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    At(Day),
    Open,
}

impl End {
    pub fn earlier(self, other: End) -> End {
        match (self, other) {
            (End::Open, x) | (x, End::Open) => x,
            (End::At(a), End::At(b)) => End::At(a.min(b)),
        }
    }

    pub fn day(self) -> Option<Day> {
        match self {
            End::At(d) => Some(d),
            End::Open => None,
        }
    }

    /// True when `t` lies strictly before this end.
    pub fn is_after(self, t: Day) -> bool {
        match self {
            End::At(d) => t < d,
            End::Open => true,
        }
    }
}

impl PartialOrd for End {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for End {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (End::Open, End::Open) => Equal,
            (End::Open, _) => Greater,
            (_, End::Open) => Less,
            (End::At(a), End::At(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            End::At(d) => d.fmt(f),
            End::Open => f.write_str("OPEN"),
        }
    }
}

impl Serialize for End {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for End {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<End, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == "OPEN" {
            Ok(End::Open)
        } else {
            s.parse().map(End::At).map_err(serde::de::Error::custom)
        }
    }
}

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

fn month_number(name: &str) -> Option<u32> {
    let name = name.to_lowercase();
    MONTHS.iter().position(|m| *m == name).map(|i| i as u32 + 1)
}

const MONTH_ALT: &str = "January|February|March|April|May|June|July|August|September|October|November|December";

/// Unanchored date pattern; alternatives are ordered longest-first so the
/// leftmost match is also the most specific one.
pub(crate) static DATE_PATTERN: LazyLock<String> = LazyLock::new(|| {
    format!(
        r"(?:(?:{m}) \d{{1,2}}, \d{{4}}|\d{{1,2}} (?:{m}) \d{{4}}|\d{{4}}-\d{{2}}-\d{{2}}|(?:{m}) \d{{4}}|\b[12]\d{{3}}\b)",
        m = MONTH_ALT
    )
});

static FULL_DATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!("^(?i:{})$", *DATE_PATTERN)).expect("date regex"));

static MDY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"^(?i)({MONTH_ALT}) (\d{{1,2}}), (\d{{4}})$")).expect("mdy regex")
});
static DMY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"^(?i)(\d{{1,2}}) ({MONTH_ALT}) (\d{{4}})$")).expect("dmy regex")
});
static MY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"^(?i)({MONTH_ALT}) (\d{{4}})$")).expect("my regex"));
static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([12]\d{3})$").expect("year regex"));

/// Parses one of the accepted date phrasings:
/// `March 5, 2020`, `5 March 2020`, `2020-03-05`, `March 2020`, `2020`.
/// Month-only and year-only forms anchor to the first day.
pub fn parse_date_phrase(s: &str) -> Option<Day> {
    let s = s.trim();
    if !FULL_DATE.is_match(s) {
        return None;
    }
    if let Some(c) = MDY.captures(s) {
        return Day::from_ymd(c[3].parse().ok()?, month_number(&c[1])?, c[2].parse().ok()?);
    }
    if let Some(c) = DMY.captures(s) {
        return Day::from_ymd(c[3].parse().ok()?, month_number(&c[2])?, c[1].parse().ok()?);
    }
    if let Some(c) = MY.captures(s) {
        return Day::from_ymd(c[2].parse().ok()?, month_number(&c[1])?, 1);
    }
    if let Some(c) = YEAR.captures(s) {
        return Day::from_ymd(c[1].parse().ok()?, 1, 1);
    }
    s.parse().ok()
}

/// Formats a day the way the synthetic corpus and fixtures write dates.
pub fn long_form(day: Day) -> String {
    let d = day.date();
    let month = MONTHS[d.month0() as usize];
    let mut cap = month.to_string();
    cap[..1].make_ascii_uppercase();
    format!("{} {}, {}", cap, d.day(), d.year())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(s: &str) -> Day {
        s.parse().unwrap()
    }

    #[test]
    fn parses_accepted_formats() {
        assert_eq!(parse_date_phrase("March 5, 2020"), Some(day("2020-03-05")));
        assert_eq!(parse_date_phrase("5 March 2020"), Some(day("2020-03-05")));
        assert_eq!(parse_date_phrase("2020-03-05"), Some(day("2020-03-05")));
        assert_eq!(parse_date_phrase("March 2020"), Some(day("2020-03-01")));
        assert_eq!(parse_date_phrase("2020"), Some(day("2020-01-01")));
        assert_eq!(parse_date_phrase("February 30, 2020"), None);
        assert_eq!(parse_date_phrase("Acme"), None);
    }

    #[test]
    fn truncates_time_of_day() {
        assert_eq!(day("2021-06-01T13:45:00Z"), day("2021-06-01"));
    }

    #[test]
    fn end_ordering_and_earlier() {
        let d = day("2020-01-01");
        assert_eq!(End::Open.earlier(End::At(d)), End::At(d));
        assert_eq!(End::At(d).earlier(End::Open), End::At(d));
        assert!(End::Open > End::At(d));
        assert!(End::At(d).is_after(day("2019-12-31")));
        assert!(!End::At(d).is_after(d));
    }

    #[test]
    fn end_serializes_open_sentinel() {
        assert_eq!(serde_json::to_string(&End::Open).unwrap(), "\"OPEN\"");
        let e: End = serde_json::from_str("\"2020-02-01\"").unwrap();
        assert_eq!(e, End::At(day("2020-02-01")));
    }

    #[test]
    fn long_form_round_trips() {
        let d = day("2015-11-09");
        assert_eq!(long_form(d), "November 9, 2015");
        assert_eq!(parse_date_phrase(&long_form(d)), Some(d));
    }
}
