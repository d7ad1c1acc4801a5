use serde::{Deserialize, Serialize};

use crate::drugs::DrugEffect;
use crate::event::{EventActor, EventTiming, Intervention, Mitigation, SimEventKind};
use crate::script::{ScenarioScript, ScriptError};
use crate::vitals::{mean_arterial, VitalSigns, VitalsError, ETCO2_MAX, HR_MAX, PRESSURE_MAX, RR_MAX};

/// Fixed integration rate of the engine. Callers may step in any positive
/// increment; internally time only ever advances in whole ticks.
pub const TICK_HZ: u32 = 10;

const TICK_LEN_S: f64 = 0.1;
const TIME_EPS: f64 = 1e-9;

/// Bleed rates per hemorrhage stage 1..=4, mL/s.
const HEMORRHAGE_RATES: [f64; 4] = [2.0, 8.0, 20.0, 50.0];
/// Blood volume at which the shock response saturates.
const SHOCK_VOLUME_ML: f64 = 5000.0;
const HR_SHOCK_GAIN: f64 = 0.6;
const MAP_SHOCK_DROP: f64 = 0.5;

const SPO2_DECLINE_PER_S: f64 = 0.4;
const SPO2_FLOOR: f64 = 70.0;
const ETCO2_RISE_PER_S: f64 = 0.2;
const ETCO2_CAP: f64 = 60.0;
/// Exponential recovery time constant after needle decompression.
const RECOVERY_TAU_S: f64 = 30.0;
/// Delay between deciding to convert to open surgery and bleeding control.
const BLEED_CONTROL_DELAY_S: f64 = 30.0;

/// An event that actually happened, stamped with its session-relative time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredEvent {
    pub t: f64,
    pub kind: SimEventKind,
    pub actor: EventActor,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhysioError {
    #[error("step size must be positive, got {0}")]
    InvalidStep(f64),
    #[error("snapshot time {t} outside the evaluable range [0, {max}]")]
    OutOfRange { t: f64, max: f64 },
    #[error("invalid intervention: {0}")]
    InvalidIntervention(String),
    #[error("non-finite value produced by the model: {0}")]
    Numerical(String),
    #[error(transparent)]
    Script(#[from] ScriptError),
}

#[derive(Debug, Clone, PartialEq)]
struct Decompression {
    t: f64,
    spo2: f64,
    etco2: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum MitigationKey {
    Kind(SimEventKind),
    Drug(String),
}

/// Deterministic scripted patient engine.
///
/// Scripted events fire on the tick grid but are recorded at their nominal
/// times, and vitals are evaluated in closed form from the recorded history,
/// so trajectories are exact piecewise expressions rather than accumulated
/// sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientEngine {
    baseline: VitalSigns,
    duration_s: f64,
    pending: Vec<crate::event::ScriptedEvent>,
    next_pending: usize,
    tick: u64,
    stage: u8,
    /// (start_t, rate mL/s) segments, sorted by start time; each segment
    /// runs until the next one begins.
    loss_segments: Vec<(f64, f64)>,
    control_at: Option<f64>,
    pneumo_onset: Option<f64>,
    decompression: Option<Decompression>,
    drugs: Vec<DrugEffect>,
    fired: Vec<FiredEvent>,
    last_resolution_t: f64,
    mitigations: Vec<(f64, MitigationKey)>,
}

impl PatientEngine {
    pub fn new(script: &ScenarioScript, duration_s: f64) -> Result<Self, PhysioError> {
        script.validate(duration_s)?;
        Ok(Self {
            baseline: script.baseline,
            duration_s,
            pending: script.events.clone(),
            next_pending: 0,
            tick: 0,
            stage: 0,
            loss_segments: Vec::new(),
            control_at: None,
            pneumo_onset: None,
            decompression: None,
            drugs: Vec::new(),
            fired: Vec::new(),
            last_resolution_t: 0.0,
            mitigations: Vec::new(),
        })
    }

    /// Session-relative time the engine has processed up to, in seconds.
    pub fn time(&self) -> f64 {
        self.tick as f64 / TICK_HZ as f64
    }

    pub fn duration(&self) -> f64 {
        self.duration_s
    }

    pub fn baseline(&self) -> &VitalSigns {
        &self.baseline
    }

    pub fn current_stage(&self) -> u8 {
        self.stage
    }

    pub fn pneumothorax_active(&self) -> bool {
        self.pneumo_onset.is_some() && self.decompression.is_none()
    }

    /// Everything that has happened so far, in firing order.
    pub fn event_log(&self) -> &[FiredEvent] {
        &self.fired
    }

    /// Events that still shape the current state: the latest hemorrhage
    /// stage, an untreated pneumothorax, an applied decompression or
    /// conversion.
    pub fn active_events(&self) -> Vec<FiredEvent> {
        let mut active: Vec<FiredEvent> = Vec::new();
        let mut latest_stage: Option<&FiredEvent> = None;
        for ev in &self.fired {
            match ev.kind {
                SimEventKind::HemorrhageStage(_) => latest_stage = Some(ev),
                SimEventKind::PneumothoraxOnset
                | SimEventKind::NeedleDecompression
                | SimEventKind::ConvertToOpen => active.push(ev.clone()),
                _ => {}
            }
        }
        if let Some(stage) = latest_stage {
            active.insert(0, stage.clone());
        }
        active
    }

    /// Advance by `dt` seconds (quantized to whole ticks).
    pub fn step(&mut self, dt: f64) -> Result<Vec<FiredEvent>, PhysioError> {
        if !(dt > 0.0) {
            return Err(PhysioError::InvalidStep(dt));
        }
        self.advance_to(self.time() + dt)
    }

    /// Process every whole tick up to `t` (clamped to the session duration),
    /// firing scripted events as their conditions are met. Returns the
    /// events fired during this call.
    pub fn advance_to(&mut self, t: f64) -> Result<Vec<FiredEvent>, PhysioError> {
        let target = t.min(self.duration_s);
        let target_tick = (target * TICK_HZ as f64 + TIME_EPS).floor() as u64;
        let mut fired = Vec::new();
        while self.tick < target_tick {
            self.tick += 1;
            self.fire_due_events(&mut fired);
        }
        Ok(fired)
    }

    fn fire_due_events(&mut self, fired: &mut Vec<FiredEvent>) {
        let now = self.time();
        while self.next_pending < self.pending.len() {
            let entry = self.pending[self.next_pending].clone();
            let (due_at, suppressed) = match &entry.timing {
                EventTiming::At { t } => (*t, false),
                EventTiming::DwellAfterPrevious { dwell, unless } => {
                    let deadline = self.last_resolution_t + dwell;
                    let suppressed = unless
                        .as_ref()
                        .is_some_and(|m| self.mitigated_by(m, deadline));
                    (deadline, suppressed)
                }
            };
            if due_at > now + TIME_EPS {
                break;
            }
            // Entries resolve strictly in script order; a nominal time that
            // already passed while an earlier entry was pending fires late.
            let t_fire = due_at.max(self.last_resolution_t);
            self.next_pending += 1;
            self.last_resolution_t = t_fire;
            if !suppressed {
                let ev = FiredEvent { t: t_fire, kind: entry.kind, actor: entry.actor };
                self.record_event(&ev);
                self.fired.push(ev.clone());
                fired.push(ev);
            }
        }
    }

    fn record_event(&mut self, ev: &FiredEvent) {
        match ev.kind {
            SimEventKind::HemorrhageStage(stage) => {
                if stage > self.stage {
                    self.stage = stage;
                    let controlled = self.control_at.is_some_and(|ct| ev.t >= ct);
                    if !controlled {
                        let rate = HEMORRHAGE_RATES[(stage - 1) as usize];
                        self.push_segment(ev.t, rate);
                    }
                }
            }
            SimEventKind::PneumothoraxOnset => {
                if self.pneumo_onset.is_none() {
                    self.pneumo_onset = Some(ev.t);
                }
            }
            _ => {}
        }
    }

    fn push_segment(&mut self, start: f64, rate: f64) {
        let pos = self
            .loss_segments
            .iter()
            .position(|(s, _)| *s > start)
            .unwrap_or(self.loss_segments.len());
        self.loss_segments.insert(pos, (start, rate));
    }

    fn mitigated_by(&self, m: &Mitigation, before: f64) -> bool {
        self.mitigations.iter().any(|(t, key)| {
            *t <= before + TIME_EPS
                && match (m, key) {
                    (Mitigation::Event { kind }, MitigationKey::Kind(k)) => kind == k,
                    (Mitigation::Drug { drug }, MitigationKey::Drug(d)) => drug == d,
                    _ => false,
                }
        })
    }

    /// Apply a team intervention at the engine's current time.
    ///
    /// Event interventions are appended to the event log; drug
    /// administrations are tracked separately and show up only through
    /// their effect on the vitals.
    pub fn apply_intervention(&mut self, iv: Intervention) -> Result<(), PhysioError> {
        let now = self.time();
        match iv {
            Intervention::Event { kind, actor } => {
                match kind {
                    SimEventKind::HemorrhageStage(_) | SimEventKind::PneumothoraxOnset => {
                        return Err(PhysioError::InvalidIntervention(format!(
                            "{kind:?} is scripted, not a team intervention"
                        )));
                    }
                    SimEventKind::NeedleDecompression => {
                        if !self.pneumothorax_active() {
                            return Err(PhysioError::InvalidIntervention(
                                "needle decompression requires an active pneumothorax".into(),
                            ));
                        }
                        self.decompression = Some(Decompression {
                            t: now,
                            spo2: self.model_spo2(now),
                            etco2: self.model_etco2(now),
                        });
                    }
                    SimEventKind::ConvertToOpen => {
                        if self.stage == 0 {
                            return Err(PhysioError::InvalidIntervention(
                                "conversion to open requires active hemorrhage".into(),
                            ));
                        }
                        if self.control_at.is_some() {
                            return Err(PhysioError::InvalidIntervention(
                                "conversion to open already performed".into(),
                            ));
                        }
                        let control = now + BLEED_CONTROL_DELAY_S;
                        self.control_at = Some(control);
                        self.push_segment(control, 0.0);
                    }
                    SimEventKind::Timeout
                    | SimEventKind::EquipmentArrival
                    | SimEventKind::HelpArrives => {}
                }
                self.mitigations.push((now, MitigationKey::Kind(kind)));
                self.fired.push(FiredEvent { t: now, kind, actor });
                Ok(())
            }
            Intervention::Drug(effect) => {
                effect
                    .validate()
                    .map_err(|e| PhysioError::InvalidIntervention(e.to_string()))?;
                self.mitigations.push((now, MitigationKey::Drug(effect.drug.clone())));
                self.drugs.push(effect);
                Ok(())
            }
        }
    }

    /// Drugs administered so far, in administration order.
    pub fn administered_drugs(&self) -> &[DrugEffect] {
        &self.drugs
    }

    fn model_spo2(&self, t: f64) -> f64 {
        let Some(onset) = self.pneumo_onset else {
            return self.baseline.spo2;
        };
        if t <= onset {
            return self.baseline.spo2;
        }
        if let Some(d) = &self.decompression {
            if t >= d.t {
                let deficit = self.baseline.spo2 - d.spo2;
                return self.baseline.spo2 - deficit * (-(t - d.t) / RECOVERY_TAU_S).exp();
            }
        }
        (self.baseline.spo2 - SPO2_DECLINE_PER_S * (t - onset)).max(SPO2_FLOOR)
    }

    fn model_etco2(&self, t: f64) -> f64 {
        let Some(onset) = self.pneumo_onset else {
            return self.baseline.etco2;
        };
        if t <= onset {
            return self.baseline.etco2;
        }
        if let Some(d) = &self.decompression {
            if t >= d.t {
                let excess = d.etco2 - self.baseline.etco2;
                return self.baseline.etco2 + excess * (-(t - d.t) / RECOVERY_TAU_S).exp();
            }
        }
        (self.baseline.etco2 + ETCO2_RISE_PER_S * (t - onset)).min(ETCO2_CAP)
    }

    /// Cumulative blood loss at time `t`.
    pub fn blood_loss_at(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for (i, (start, rate)) in self.loss_segments.iter().enumerate() {
            if t <= *start {
                break;
            }
            let end = self
                .loss_segments
                .get(i + 1)
                .map(|(s, _)| *s)
                .unwrap_or(f64::INFINITY);
            total += rate * (t.min(end) - start);
        }
        total
    }

    /// Pure snapshot of the vitals at `t`.
    ///
    /// `t` may range over everything the engine has processed plus one tick
    /// of closed-form extension (used by display loops between sim ticks).
    pub fn vitals_at(&self, t: f64) -> Result<VitalSigns, PhysioError> {
        let max = (self.time() + TICK_LEN_S).min(self.duration_s);
        if !(0.0..=max + TIME_EPS).contains(&t) {
            return Err(PhysioError::OutOfRange { t, max });
        }

        let loss = self.blood_loss_at(t);
        let shock = (loss / SHOCK_VOLUME_ML).clamp(0.0, 1.0);

        let mut delta = crate::drugs::VitalDeltas::default();
        for drug in &self.drugs {
            let m = drug.magnitude(t);
            delta.hr += drug.targets.hr * m;
            delta.sbp += drug.targets.sbp * m;
            delta.dbp += drug.targets.dbp * m;
            delta.spo2 += drug.targets.spo2 * m;
            delta.rr += drug.targets.rr * m;
            delta.etco2 += drug.targets.etco2 * m;
        }

        let hr = (self.baseline.hr * (1.0 + HR_SHOCK_GAIN * shock) + delta.hr).clamp(0.0, HR_MAX);
        let sbp =
            (self.baseline.sbp * (1.0 - MAP_SHOCK_DROP * shock) + delta.sbp).clamp(0.0, PRESSURE_MAX);
        let dbp = (self.baseline.dbp * (1.0 - MAP_SHOCK_DROP * shock) + delta.dbp)
            .clamp(0.0, PRESSURE_MAX)
            .min(sbp);
        let spo2 = (self.model_spo2(t) + delta.spo2).clamp(0.0, 100.0);
        let rr = (self.baseline.rr + delta.rr).clamp(0.0, RR_MAX);
        let etco2 = (self.model_etco2(t) + delta.etco2).clamp(0.0, ETCO2_MAX);

        let vitals = VitalSigns {
            hr,
            sbp,
            dbp,
            map: mean_arterial(sbp, dbp),
            spo2,
            rr,
            etco2,
            blood_loss: loss,
        };
        match vitals.validate() {
            Ok(()) => Ok(vitals),
            Err(VitalsError::NonFinite(field)) => Err(PhysioError::Numerical(field.to_string())),
            Err(other) => Err(PhysioError::Numerical(other.to_string())),
        }
    }

    /// Vitals at the engine's current processed time.
    pub fn vitals(&self) -> Result<VitalSigns, PhysioError> {
        self.vitals_at(self.time())
    }
}
