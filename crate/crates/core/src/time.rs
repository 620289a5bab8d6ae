//! Exchange-local timestamps on the session-minute clock.

use std::fmt;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A trading date plus minute of day (minutes after midnight, local wall clock).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stamp {
    pub date: NaiveDate,
    pub minute: u32,
}

impl Stamp {
    pub fn new(date: NaiveDate, minute: u32) -> Self {
        Stamp { date, minute }
    }

    pub fn time_string(&self) -> String {
        format_minute(self.minute)
    }
}

impl fmt::Display for Stamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.date.format("%Y-%m-%d"), format_minute(self.minute))
    }
}

pub fn format_minute(minute: u32) -> String {
    format!("{:02}:{:02}", minute / 60, minute % 60)
}

/// Parse `HH:MM` into minutes after midnight.
pub fn parse_minute(s: &str) -> Result<u32> {
    let (h, m) = s
        .trim()
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("time {s:?} is not HH:MM")))?;
    let h: u32 = h
        .parse()
        .map_err(|_| Error::invalid(format!("bad hour in {s:?}")))?;
    let m: u32 = m
        .parse()
        .map_err(|_| Error::invalid(format!("bad minute in {s:?}")))?;
    if h > 23 || m > 59 {
        return Err(Error::invalid(format!("time {s:?} out of range")));
    }
    Ok(h * 60 + m)
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::invalid(format!("date {s:?}: {e}")))
}

/// Consecutive weekdays starting at `start` (or the next weekday after it).
pub fn weekdays_from(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// First trading day used when a series arrives without its own calendar.
pub fn synthetic_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2007, 1, 4).expect("valid date")
}

/// Stamps for `n` samples of spacing `delta_t` minutes laid on a synthetic
/// weekday calendar with `minutes_per_day` session minutes starting at 09:00.
pub fn synthetic_stamps(n: usize, delta_t: u32, minutes_per_day: u32) -> Vec<Stamp> {
    let per_day = (minutes_per_day / delta_t.max(1)).max(1) as usize;
    let days = weekdays_from(synthetic_epoch(), n.div_ceil(per_day));
    (0..n)
        .map(|i| {
            let day = i / per_day;
            let slot = (i % per_day) as u32 + 1;
            Stamp::new(days[day], 9 * 60 + slot * delta_t)
        })
        .collect()
}
