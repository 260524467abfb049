//! Time source abstraction so sessions and manifests can be produced
//! deterministically.

use std::sync::Mutex;

use chrono::{DateTime, Duration, NaiveDateTime, SecondsFormat, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct FixedClock(Mutex<DateTime<Utc>>);

impl FixedClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        Self(Mutex::new(at))
    }

    /// Parses an ISO-8601 / RFC 3339 timestamp.
    pub fn parse(text: &str) -> Result<Self, chrono::ParseError> {
        Ok(Self::new(DateTime::parse_from_rfc3339(text)?.with_timezone(&Utc)))
    }

    pub fn advance(&self, by: Duration) {
        *self.0.lock().unwrap() += by;
    }

    pub fn set(&self, at: DateTime<Utc>) {
        *self.0.lock().unwrap() = at;
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

/// `YYYY-MM-DDTHH:MM:SSZ`, truncated to whole seconds.
pub fn format_utc(at: DateTime<Utc>) -> String {
    at.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Inverse of [`format_utc`]; rejects anything but the exact layout.
pub fn parse_utc(text: &str) -> Option<DateTime<Utc>> {
    let naive = NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%SZ").ok()?;
    let at = naive.and_utc();
    (format_utc(at) == text).then_some(at)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utc_layout() {
        let clock = FixedClock::parse("2024-03-01T12:30:45.987+02:00").unwrap();
        assert_eq!(format_utc(clock.now()), "2024-03-01T10:30:45Z");
        assert!(parse_utc("2024-03-01T10:30:45Z").is_some());
        assert!(parse_utc("2024-03-01T10:30:45+00:00").is_none());
        assert!(parse_utc("2024-03-01 10:30:45Z").is_none());
        assert!(parse_utc("2024-03-01T10:30:45.1Z").is_none());
    }

    #[test]
    fn fixed_clock_advances() {
        let clock = FixedClock::parse("2024-01-01T00:00:00Z").unwrap();
        clock.advance(Duration::seconds(3601));
        assert_eq!(format_utc(clock.now()), "2024-01-01T01:00:01Z");
    }
}
