use serde::{Deserialize, Serialize};

/// Absolute session start (microseconds since the Unix epoch) plus the
/// scheduled duration. All analytics timestamps are session-relative;
/// wall-clock time never leaves the server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionClock {
    pub session_start_us: i64,
    pub duration_s: f64,
}

impl SessionClock {
    pub fn new(session_start_us: i64, duration_s: f64) -> Result<Self, TimestampError> {
        if !(duration_s > 0.0) {
            return Err(TimestampError::InvalidDuration(duration_s));
        }
        Ok(Self { session_start_us, duration_s })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= 0.0 && t <= self.duration_s
    }

    /// Convert a client-local microsecond stamp to session-relative seconds
    /// using that client's estimated clock offset (server minus client).
    pub fn to_session_seconds(&self, local_us: i64, offset_us: i64) -> f64 {
        (local_us + offset_us - self.session_start_us) as f64 / 1e6
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimestampError {
    #[error("malformed timestamp {0:?}: expected H:MM:SS or HH:MM:SS")]
    Parse(String),
    #[error("minute or second field out of range in {0:?}")]
    Range(String),
    #[error("session duration must be positive, got {0}")]
    InvalidDuration(f64),
}

/// Parse a `H:MM:SS` or `HH:MM:SS` clock string into whole seconds.
///
/// Minutes and seconds must be two digits in `00..=59`; hours may be one or
/// two digits. Returns `3600*H + 60*M + S`.
pub fn parse_timestamp(text: &str) -> Result<u32, TimestampError> {
    let malformed = || TimestampError::Parse(text.to_string());
    let mut parts = text.split(':');
    let (h, m, s) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(h), Some(m), Some(s), None) => (h, m, s),
        _ => return Err(malformed()),
    };
    if h.is_empty() || h.len() > 2 || m.len() != 2 || s.len() != 2 {
        return Err(malformed());
    }
    let digits = |field: &str| -> Result<u32, TimestampError> {
        if !field.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        field.parse::<u32>().map_err(|_| malformed())
    };
    let (h, m, s) = (digits(h)?, digits(m)?, digits(s)?);
    if m > 59 || s > 59 {
        return Err(TimestampError::Range(text.to_string()));
    }
    Ok(h * 3600 + m * 60 + s)
}

/// Render whole seconds as `H:MM:SS`. Hours are not zero-padded, matching
/// the canonical output form used in transcripts and edge descriptions.
pub fn format_timestamp(total_seconds: u32) -> String {
    let h = total_seconds / 3600;
    let m = (total_seconds % 3600) / 60;
    let s = total_seconds % 60;
    format!("{h}:{m:02}:{s:02}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_reference_timestamps() {
        assert_eq!(parse_timestamp("1:34:13"), Ok(5653));
        assert_eq!(parse_timestamp("0:00:00"), Ok(0));
        assert_eq!(parse_timestamp("00:01:00"), Ok(60));
    }

    #[test]
    fn rejects_malformed_text() {
        for text in ["", "1:2:03", "123:00:00", "12:00", "a:00:00", "1:00:0x", "1:00:00:00", "-1:00:00"] {
            assert!(
                matches!(parse_timestamp(text), Err(TimestampError::Parse(_))),
                "{text:?}"
            );
        }
    }

    #[test]
    fn rejects_out_of_range_fields() {
        for text in ["0:60:00", "0:00:60", "9:99:99"] {
            assert!(
                matches!(parse_timestamp(text), Err(TimestampError::Range(_))),
                "{text:?}"
            );
        }
    }

    #[test]
    fn formats_without_hour_padding() {
        assert_eq!(format_timestamp(5653), "1:34:13");
        assert_eq!(format_timestamp(0), "0:00:00");
        assert_eq!(format_timestamp(359_999), "99:59:59");
    }

    #[test]
    fn clock_rejects_nonpositive_duration() {
        assert!(SessionClock::new(0, 0.0).is_err());
        assert!(SessionClock::new(0, -5.0).is_err());
        assert!(SessionClock::new(0, 600.0).is_ok());
    }

    #[test]
    fn session_conversion_applies_offset() {
        let clock = SessionClock::new(1_000_000, 600.0).unwrap();
        // Client stamp 10s into the session on a clock running 2.5s behind.
        assert_eq!(clock.to_session_seconds(8_500_000, 2_500_000), 10.0);
    }

    proptest! {
        #[test]
        fn parse_inverts_format(total in 0u32..=359_999) {
            prop_assert_eq!(parse_timestamp(&format_timestamp(total)), Ok(total));
        }

        #[test]
        fn parse_never_panics(text in "\\PC*") {
            let _ = parse_timestamp(&text);
        }
    }
}
