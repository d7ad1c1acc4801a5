use serde::{Deserialize, Serialize};

/// One request/response exchange: client send, server receive, server send,
/// client receive, all in the respective sender's local microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSyncSample {
    pub t1: i64,
    pub t2: i64,
    pub t3: i64,
    pub t4: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TimeSyncError {
    #[error("no time-sync samples to estimate from")]
    NoSamples,
    #[error("sample violates causality (t4 >= t1 and t3 >= t2 required)")]
    Causality,
}

impl TimeSyncSample {
    pub fn validate(&self) -> Result<(), TimeSyncError> {
        if self.t4 < self.t1 || self.t3 < self.t2 {
            return Err(TimeSyncError::Causality);
        }
        Ok(())
    }

    /// Estimated remote-minus-local clock offset for this sample,
    /// `((t2 - t1) + (t3 - t4)) / 2`, in microseconds.
    pub fn offset_us(&self) -> f64 {
        ((self.t2 - self.t1) as f64 + (self.t3 - self.t4) as f64) / 2.0
    }

    /// Network round-trip with the remote processing time removed.
    pub fn rtt_us(&self) -> i64 {
        (self.t4 - self.t1) - (self.t3 - self.t2)
    }
}

/// Offset of the sample with the smallest round-trip time. Symmetric-latency
/// samples estimate exactly; picking the minimum-RTT sample minimizes the
/// queueing asymmetry bias. Ties keep the earliest sample.
pub fn estimate_clock_offset(samples: &[TimeSyncSample]) -> Result<f64, TimeSyncError> {
    let mut best: Option<&TimeSyncSample> = None;
    for s in samples {
        s.validate()?;
        if best.is_none_or(|b| s.rtt_us() < b.rtt_us()) {
            best = Some(s);
        }
    }
    best.map(TimeSyncSample::offset_us).ok_or(TimeSyncError::NoSamples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synchronized_clocks_estimate_zero() {
        let s = TimeSyncSample { t1: 100, t2: 100, t3: 140, t4: 140 };
        assert_eq!(estimate_clock_offset(&[s]).unwrap(), 0.0);
    }

    #[test]
    fn worked_offset_example() {
        let s = TimeSyncSample { t1: 100, t2: 160, t3: 165, t4: 120 };
        assert_eq!(s.offset_us(), 52.5);
        assert_eq!(estimate_clock_offset(&[s]).unwrap(), 52.5);
    }

    #[test]
    fn high_rtt_outliers_are_ignored() {
        let good = TimeSyncSample { t1: 0, t2: 510, t3: 520, t4: 20 }; // rtt 10
        let outlier = TimeSyncSample { t1: 1000, t2: 2400, t3: 2410, t4: 2000 }; // rtt 990
        let base = estimate_clock_offset(&[good]).unwrap();
        assert_eq!(estimate_clock_offset(&[good, outlier]).unwrap(), base);
        assert_eq!(estimate_clock_offset(&[outlier, good]).unwrap(), base);
    }

    #[test]
    fn symmetric_constant_latency_is_exact() {
        // True offset +500, 50us each way, varying processing delays.
        for processing in [0, 10, 250] {
            let t1 = 10_000;
            let t2 = t1 + 500 + 50;
            let t3 = t2 + processing;
            let t4 = t1 + 50 + processing + 50;
            let s = TimeSyncSample { t1, t2, t3, t4 };
            assert_eq!(estimate_clock_offset(&[s]).unwrap(), 500.0);
        }
    }

    #[test]
    fn empty_input_errors() {
        assert_eq!(estimate_clock_offset(&[]), Err(TimeSyncError::NoSamples));
    }

    #[test]
    fn causality_violations_are_rejected() {
        let s = TimeSyncSample { t1: 100, t2: 90, t3: 80, t4: 90 };
        assert_eq!(estimate_clock_offset(&[s]), Err(TimeSyncError::Causality));
    }
}
