use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Additive per-vital peak deltas a drug applies at dose 1.0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VitalDeltas {
    pub hr: f64,
    pub sbp: f64,
    pub dbp: f64,
    pub spo2: f64,
    pub rr: f64,
    pub etco2: f64,
}

impl VitalDeltas {
    pub fn is_zero(&self) -> bool {
        [self.hr, self.sbp, self.dbp, self.spo2, self.rr, self.etco2]
            .iter()
            .all(|d| *d == 0.0)
    }
}

/// One administered drug with onset/washout time constants.
///
/// The effect envelope is
/// `dose * (1 - exp(-(t - t_admin)/tau_on)) * exp(-max(0, t - t_admin - 3*tau_on)/tau_off)`,
/// which is zero at the administration time, rises smoothly to roughly
/// `dose` by `3*tau_on`, then washes out exponentially.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugEffect {
    pub drug: String,
    pub dose: f64,
    pub t_admin: f64,
    pub tau_on: f64,
    pub tau_off: f64,
    pub targets: VitalDeltas,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DrugError {
    #[error("time constant {name} must be positive, got {value}")]
    NonPositiveTau { name: &'static str, value: f64 },
    #[error("unknown drug {0:?}")]
    UnknownDrug(String),
}

impl DrugEffect {
    pub fn validate(&self) -> Result<(), DrugError> {
        if !(self.tau_on > 0.0) {
            return Err(DrugError::NonPositiveTau { name: "tau_on", value: self.tau_on });
        }
        if !(self.tau_off > 0.0) {
            return Err(DrugError::NonPositiveTau { name: "tau_off", value: self.tau_off });
        }
        Ok(())
    }

    /// Envelope magnitude at time `t`; exactly zero at and before `t_admin`.
    pub fn magnitude(&self, t: f64) -> f64 {
        if t <= self.t_admin {
            return 0.0;
        }
        let dt = t - self.t_admin;
        let onset = 1.0 - (-dt / self.tau_on).exp();
        let washout = (-((dt - 3.0 * self.tau_on).max(0.0)) / self.tau_off).exp();
        self.dose * onset * washout
    }
}

/// Per-drug pharmacodynamic parameters, keyed by drug identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugParams {
    pub tau_on: f64,
    pub tau_off: f64,
    pub targets: VitalDeltas,
}

/// Drug parameter table. The stock table covers the anesthesiologist's
/// default cart (epinephrine, phenylephrine, crystalloid bolus, blood
/// transfusion); deployments can load their own table from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DrugTable {
    entries: BTreeMap<String, DrugParams>,
}

impl DrugTable {
    pub fn builtin() -> DrugTable {
        serde_json::from_str(include_str!("../../../fixtures/drugs.json"))
            .expect("builtin drug table is valid")
    }

    pub fn from_json_str(json: &str) -> serde_json::Result<DrugTable> {
        serde_json::from_str(json)
    }

    pub fn get(&self, drug: &str) -> Option<&DrugParams> {
        self.entries.get(drug)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    /// Instantiate an administration of `drug` at `t_admin`.
    pub fn effect(&self, drug: &str, dose: f64, t_admin: f64) -> Result<DrugEffect, DrugError> {
        let params = self
            .entries
            .get(drug)
            .ok_or_else(|| DrugError::UnknownDrug(drug.to_string()))?;
        let effect = DrugEffect {
            drug: drug.to_string(),
            dose,
            t_admin,
            tau_on: params.tau_on,
            tau_off: params.tau_off,
            targets: params.targets,
        };
        effect.validate()?;
        Ok(effect)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_effect() -> DrugEffect {
        DrugEffect {
            drug: "epinephrine".into(),
            dose: 1.0,
            t_admin: 10.0,
            tau_on: 10.0,
            tau_off: 60.0,
            targets: VitalDeltas { hr: 25.0, ..VitalDeltas::default() },
        }
    }

    #[test]
    fn magnitude_is_zero_at_administration() {
        let e = sample_effect();
        assert_eq!(e.magnitude(10.0), 0.0);
        assert_eq!(e.magnitude(0.0), 0.0);
    }

    #[test]
    fn magnitude_rises_then_washes_out() {
        let e = sample_effect();
        let rising = e.magnitude(20.0);
        let near_peak = e.magnitude(40.0);
        let late = e.magnitude(400.0);
        assert!(rising > 0.0 && near_peak > rising);
        assert!(late < near_peak);
        assert!((near_peak - (1.0 - (-3.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_tau_is_rejected() {
        let mut e = sample_effect();
        e.tau_on = 0.0;
        assert!(matches!(e.validate(), Err(DrugError::NonPositiveTau { name: "tau_on", .. })));
    }

    #[test]
    fn builtin_table_instantiates_effects() {
        let table = DrugTable::builtin();
        for drug in ["epinephrine", "phenylephrine", "crystalloid_bolus", "blood_transfusion"] {
            let effect = table.effect(drug, 1.0, 0.0).unwrap();
            assert!(effect.tau_on > 0.0 && effect.tau_off > 0.0, "{drug}");
        }
        assert!(matches!(
            table.effect("espresso", 1.0, 0.0),
            Err(DrugError::UnknownDrug(_))
        ));
    }
}
