use serde::{Deserialize, Serialize};

use crate::event::{EventTiming, ScriptedEvent, SimEventKind};
use crate::vitals::VitalSigns;

/// The two supported emergency scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Bleeding,
    Pneumothorax,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Bleeding => "bleeding",
            ScenarioKind::Pneumothorax => "pneumothorax",
        }
    }
}

/// A pre-scripted, performance-responsive emergency timeline plus the
/// patient's baseline vitals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub name: ScenarioKind,
    pub baseline: VitalSigns,
    pub events: Vec<ScriptedEvent>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScriptError {
    #[error("hemorrhage stage {0} outside 1..=4")]
    BadStage(u8),
    #[error("hemorrhage stages must be non-decreasing: stage {later} follows stage {earlier}")]
    StageOrder { earlier: u8, later: u8 },
    #[error("event {kind:?} does not belong to a {scenario:?} scenario")]
    WrongScenario { scenario: ScenarioKind, kind: SimEventKind },
    #[error("fixed event time {t} outside session duration {duration}")]
    TimeOutsideSession { t: f64, duration: f64 },
    #[error("dwell must be positive, got {0}")]
    NonPositiveDwell(f64),
    #[error("fixed event times must be non-decreasing: {later} follows {earlier}")]
    UnorderedTimes { earlier: f64, later: f64 },
    #[error("baseline vitals invalid: {0}")]
    BadBaseline(#[from] crate::vitals::VitalsError),
    #[error("script is not valid JSON: {0}")]
    Json(String),
}

impl ScenarioScript {
    pub fn from_json_str(json: &str) -> Result<ScenarioScript, ScriptError> {
        serde_json::from_str(json).map_err(|e| ScriptError::Json(e.to_string()))
    }

    /// Look up a stock script by name (`"bleeding"` or `"pneumothorax"`).
    pub fn builtin(name: &str) -> Option<ScenarioScript> {
        let json = match name.trim().to_ascii_lowercase().as_str() {
            "bleeding" => include_str!("../../../fixtures/scenarios/bleeding.json"),
            "pneumothorax" => include_str!("../../../fixtures/scenarios/pneumothorax.json"),
            _ => return None,
        };
        Some(Self::from_json_str(json).expect("builtin scenario script is valid"))
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["bleeding", "pneumothorax"]
    }

    /// Validate the script against a session duration: baseline invariants,
    /// fixed times inside the session, non-decreasing hemorrhage stages, and
    /// exactly one scenario kind per script.
    pub fn validate(&self, duration_s: f64) -> Result<(), ScriptError> {
        self.baseline.validate()?;
        let mut last_stage = 0u8;
        let mut last_fixed_t = 0.0f64;
        for ev in &self.events {
            match &ev.timing {
                EventTiming::At { t } => {
                    if *t < 0.0 || *t > duration_s {
                        return Err(ScriptError::TimeOutsideSession { t: *t, duration: duration_s });
                    }
                    if *t < last_fixed_t {
                        return Err(ScriptError::UnorderedTimes { earlier: last_fixed_t, later: *t });
                    }
                    last_fixed_t = *t;
                }
                EventTiming::DwellAfterPrevious { dwell, .. } => {
                    if !(*dwell > 0.0) {
                        return Err(ScriptError::NonPositiveDwell(*dwell));
                    }
                }
            }
            match (self.name, ev.kind) {
                (ScenarioKind::Bleeding, SimEventKind::PneumothoraxOnset)
                | (ScenarioKind::Bleeding, SimEventKind::NeedleDecompression)
                | (ScenarioKind::Pneumothorax, SimEventKind::HemorrhageStage(_))
                | (ScenarioKind::Pneumothorax, SimEventKind::ConvertToOpen) => {
                    return Err(ScriptError::WrongScenario { scenario: self.name, kind: ev.kind });
                }
                _ => {}
            }
            if let Some(stage) = ev.kind.hemorrhage_stage() {
                if !(1..=4).contains(&stage) {
                    return Err(ScriptError::BadStage(stage));
                }
                if stage < last_stage {
                    return Err(ScriptError::StageOrder { earlier: last_stage, later: stage });
                }
                last_stage = stage;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventActor;

    fn event_at(t: f64, kind: SimEventKind) -> ScriptedEvent {
        ScriptedEvent { timing: EventTiming::At { t }, kind, actor: EventActor::System }
    }

    #[test]
    fn builtin_scripts_load_and_validate() {
        for name in ScenarioScript::builtin_names() {
            let script = ScenarioScript::builtin(name).unwrap();
            script.validate(600.0).unwrap();
        }
        assert!(ScenarioScript::builtin("appendectomy").is_none());
    }

    #[test]
    fn stage_regression_is_rejected() {
        let script = ScenarioScript {
            name: ScenarioKind::Bleeding,
            baseline: VitalSigns::textbook_baseline(),
            events: vec![
                event_at(10.0, SimEventKind::HemorrhageStage(2)),
                event_at(20.0, SimEventKind::HemorrhageStage(1)),
            ],
        };
        assert_eq!(
            script.validate(600.0),
            Err(ScriptError::StageOrder { earlier: 2, later: 1 })
        );
    }

    #[test]
    fn scenario_kinds_do_not_mix() {
        let script = ScenarioScript {
            name: ScenarioKind::Pneumothorax,
            baseline: VitalSigns::textbook_baseline(),
            events: vec![event_at(10.0, SimEventKind::HemorrhageStage(1))],
        };
        assert!(matches!(script.validate(600.0), Err(ScriptError::WrongScenario { .. })));
    }

    #[test]
    fn fixed_times_must_fit_the_session() {
        let script = ScenarioScript {
            name: ScenarioKind::Bleeding,
            baseline: VitalSigns::textbook_baseline(),
            events: vec![event_at(700.0, SimEventKind::HemorrhageStage(1))],
        };
        assert!(matches!(script.validate(600.0), Err(ScriptError::TimeOutsideSession { .. })));
    }

    #[test]
    fn json_round_trip() {
        let script = ScenarioScript::builtin("bleeding").unwrap();
        let json = serde_json::to_string(&script).unwrap();
        assert_eq!(ScenarioScript::from_json_str(&json).unwrap(), script);
    }
}
