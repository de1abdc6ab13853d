//! Time sources for the COMPILATION_TIME / EXECUTION_TIME stamps.

use chrono::{DateTime, NaiveDateTime, Utc};

/// Stamp format: `YYYYMMDD-HHMMSS`, UTC.
pub const TIMESTAMP_FORMAT: &str = "%Y%m%d-%H%M%S";

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always returns the same instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub fn timestamp(clock: &dyn Clock) -> String {
    format_timestamp(clock.now())
}

/// Accepts RFC 3339 (`2013-05-01T12:00:00Z`), a naive `2013-05-01T12:00:00`
/// taken as UTC, or the stamp format itself.
pub fn parse_instant(text: &str) -> Option<DateTime<Utc>> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", TIMESTAMP_FORMAT]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
        .map(|naive| naive.and_utc())
}
