use serde::{Deserialize, Serialize};

/// Instantaneous patient state as shown on the monitors.
///
/// `map` is always derived as `(sbp + 2*dbp) / 3`, which keeps
/// `dbp <= map <= sbp` whenever `dbp <= sbp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VitalSigns {
    /// Heart rate, beats/min.
    pub hr: f64,
    /// Systolic blood pressure, mmHg.
    pub sbp: f64,
    /// Diastolic blood pressure, mmHg.
    pub dbp: f64,
    /// Mean arterial pressure, mmHg.
    pub map: f64,
    /// Peripheral oxygen saturation, percent.
    pub spo2: f64,
    /// Respiratory rate, breaths/min.
    pub rr: f64,
    /// End-tidal CO2, mmHg.
    pub etco2: f64,
    /// Cumulative blood loss, mL.
    pub blood_loss: f64,
}

pub const HR_MAX: f64 = 300.0;
pub const PRESSURE_MAX: f64 = 300.0;
pub const RR_MAX: f64 = 60.0;
pub const ETCO2_MAX: f64 = 150.0;

pub fn mean_arterial(sbp: f64, dbp: f64) -> f64 {
    (sbp + 2.0 * dbp) / 3.0
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VitalsError {
    #[error("{field} = {value} outside [{min}, {max}]")]
    OutOfBounds { field: &'static str, value: f64, min: f64, max: f64 },
    #[error("pressure ordering violated: dbp {dbp} <= map {map} <= sbp {sbp} does not hold")]
    PressureOrdering { dbp: f64, map: f64, sbp: f64 },
    #[error("non-finite value in field {0}")]
    NonFinite(&'static str),
}

impl VitalSigns {
    /// Textbook resting baseline used by the stock scenario scripts.
    pub fn textbook_baseline() -> VitalSigns {
        let (sbp, dbp) = (120.0, 80.0);
        VitalSigns {
            hr: 72.0,
            sbp,
            dbp,
            map: mean_arterial(sbp, dbp),
            spo2: 98.0,
            rr: 12.0,
            etco2: 35.0,
            blood_loss: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), VitalsError> {
        let fields = [
            ("hr", self.hr, 0.0, HR_MAX),
            ("sbp", self.sbp, 0.0, PRESSURE_MAX),
            ("dbp", self.dbp, 0.0, PRESSURE_MAX),
            ("map", self.map, 0.0, PRESSURE_MAX),
            ("spo2", self.spo2, 0.0, 100.0),
            ("rr", self.rr, 0.0, RR_MAX),
            ("etco2", self.etco2, 0.0, ETCO2_MAX),
            ("blood_loss", self.blood_loss, 0.0, f64::INFINITY),
        ];
        for (field, value, min, max) in fields {
            if !value.is_finite() {
                return Err(VitalsError::NonFinite(field));
            }
            if value < min || value > max {
                return Err(VitalsError::OutOfBounds { field, value, min, max });
            }
        }
        // Allow a one-ulp slop from the map derivation.
        if self.dbp > self.map + 1e-9 || self.map > self.sbp + 1e-9 {
            return Err(VitalsError::PressureOrdering {
                dbp: self.dbp,
                map: self.map,
                sbp: self.sbp,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_satisfies_invariants() {
        let b = VitalSigns::textbook_baseline();
        b.validate().unwrap();
        assert_eq!(b.hr, 72.0);
        assert_eq!(b.spo2, 98.0);
        assert!((b.map - 93.333333333333329).abs() < 1e-12);
    }

    #[test]
    fn pressure_ordering_is_enforced() {
        let mut v = VitalSigns::textbook_baseline();
        v.map = v.sbp + 5.0;
        assert!(matches!(v.validate(), Err(VitalsError::PressureOrdering { .. })));
    }

    #[test]
    fn saturation_is_bounded() {
        let mut v = VitalSigns::textbook_baseline();
        v.spo2 = 101.0;
        assert!(matches!(v.validate(), Err(VitalsError::OutOfBounds { field: "spo2", .. })));
    }
}
