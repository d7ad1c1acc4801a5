use serde::{Deserialize, Serialize};
use vortex_core::Role;

use crate::drugs::DrugEffect;

/// Discrete scenario events, scripted or applied by the team.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimEventKind {
    HemorrhageStage(u8),
    PneumothoraxOnset,
    NeedleDecompression,
    ConvertToOpen,
    Timeout,
    EquipmentArrival,
    HelpArrives,
}

impl SimEventKind {
    /// Stage number for hemorrhage events, `None` otherwise.
    pub fn hemorrhage_stage(&self) -> Option<u8> {
        match self {
            SimEventKind::HemorrhageStage(s) => Some(*s),
            _ => None,
        }
    }
}

/// Who caused an event: the scenario script itself or a team member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventActor {
    System,
    Role(Role),
}

/// When a scripted event fires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTiming {
    /// Fixed session-relative time in seconds.
    At { t: f64 },
    /// Fires `dwell` seconds after the previous script entry resolved,
    /// unless the named mitigation was applied in the meantime. This is how
    /// escalation stays responsive to team performance: timely intervention
    /// cancels the escalation, inaction lets it fire on schedule.
    DwellAfterPrevious {
        dwell: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unless: Option<Mitigation>,
    },
}

/// A condition that suppresses a dwell-triggered escalation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mitigation {
    /// Any applied intervention of this kind (e.g. `ConvertToOpen`).
    Event { kind: SimEventKind },
    /// Any administration of this drug.
    Drug { drug: String },
}

/// One entry of a scenario script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub timing: EventTiming,
    pub kind: SimEventKind,
    pub actor: EventActor,
}

/// Team interventions that can be applied to a running engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Intervention {
    Event { kind: SimEventKind, actor: EventActor },
    Drug(DrugEffect),
}

impl Intervention {
    pub fn describe(&self) -> String {
        match self {
            Intervention::Event { kind, .. } => format!("{kind:?}"),
            Intervention::Drug(effect) => format!("drug {}", effect.drug),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_kinds_round_trip_through_json() {
        for kind in [
            SimEventKind::HemorrhageStage(3),
            SimEventKind::PneumothoraxOnset,
            SimEventKind::Timeout,
        ] {
            let json = serde_json::to_string(&kind).unwrap();
            let back: SimEventKind = serde_json::from_str(&json).unwrap();
            assert_eq!(back, kind);
        }
    }

    #[test]
    fn timing_json_shape_is_stable() {
        let timing = EventTiming::DwellAfterPrevious {
            dwell: 90.0,
            unless: Some(Mitigation::Event { kind: SimEventKind::ConvertToOpen }),
        };
        let json = serde_json::to_string(&timing).unwrap();
        assert!(json.contains("dwell_after_previous"), "{json}");
        let back: EventTiming = serde_json::from_str(&json).unwrap();
        assert_eq!(back, timing);
    }
}
