//! Deterministic patient-state engine.
//!
//! Vital signs evolve in response to scripted trauma events and administered
//! drugs. Time advances on a fixed 10 Hz grid and every vital is evaluated in
//! closed form from the recorded event history, so identical scripts and
//! intervention logs produce bit-identical trajectories.

pub mod drugs;
pub mod engine;
pub mod event;
pub mod script;
pub mod vitals;

pub use drugs::{DrugEffect, DrugParams, DrugTable, VitalDeltas};
pub use engine::{FiredEvent, PatientEngine, PhysioError, TICK_HZ};
pub use event::{EventActor, EventTiming, Intervention, Mitigation, ScriptedEvent, SimEventKind};
pub use script::{ScenarioKind, ScenarioScript, ScriptError};
pub use vitals::{VitalSigns, VitalsError};
