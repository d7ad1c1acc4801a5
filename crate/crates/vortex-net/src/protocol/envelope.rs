use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use vortex_core::{Role, SessionClock, SessionRoster};
use vortex_sim::{FiredEvent, VitalSigns};

/// Envelope carried on the reliable channel. `seq` strictly increases per
/// sender per session; retries resend the same `seq`, which receivers
/// deduplicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliableEnvelope {
    pub session_id: u64,
    pub seq: u64,
    #[serde(flatten)]
    pub body: MessageBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "msg_type", content = "payload")]
pub enum MessageBody {
    Join(JoinPayload),
    JoinAck(JoinAckPayload),
    StateSnapshot(StateSnapshotPayload),
    Event(SessionEvent),
    TimeSyncReq(TimeSyncReqPayload),
    TimeSyncResp(TimeSyncRespPayload),
    TranscriptUpload(TranscriptUploadPayload),
    SessionEnd(SessionEndPayload),
}

impl MessageBody {
    pub fn type_name(&self) -> &'static str {
        match self {
            MessageBody::Join(_) => "Join",
            MessageBody::JoinAck(_) => "JoinAck",
            MessageBody::StateSnapshot(_) => "StateSnapshot",
            MessageBody::Event(_) => "Event",
            MessageBody::TimeSyncReq(_) => "TimeSyncReq",
            MessageBody::TimeSyncResp(_) => "TimeSyncResp",
            MessageBody::TranscriptUpload(_) => "TranscriptUpload",
            MessageBody::SessionEnd(_) => "SessionEnd",
        }
    }
}

/// Join request. `session_id` 0 in the envelope means "the session served at
/// this address"; anything else must match the server's session id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinPayload {
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinAckPayload {
    pub client_id: u32,
    pub roster: SessionRoster,
    pub state: AuthoritativeState,
    /// UDP port for pose datagrams, on the same host as the reliable socket.
    pub pose_port: u16,
    pub clock: SessionClock,
    pub scenario: String,
}

/// The server-owned simulation truth. The version counter increases with
/// every mutation and is never reused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthoritativeState {
    pub version: u64,
    pub vitals: VitalSigns,
    pub active_events: Vec<FiredEvent>,
    pub roster: SessionRoster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshotPayload {
    pub state: AuthoritativeState,
}

/// Critical events flowing over the reliable channel, in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SessionEvent {
    /// Client request or, with `version` set, the server's applied broadcast.
    Intervention {
        action: InterventionAction,
        actor: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        version: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    /// Roster changed (someone joined); broadcast by the server.
    RosterUpdate { roster: SessionRoster, version: u64 },
    /// A scripted scenario event fired; broadcast by the server.
    Scripted { event: FiredEvent, version: u64 },
    /// Unicast rejection of a client message, referencing its `seq`.
    Rejected { ref_seq: u64, code: RejectCode, detail: String },
}

/// Interventions a client may request. Each action is permitted to exactly
/// one role; the server enforces the table below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action")]
pub enum InterventionAction {
    Timeout,
    EquipmentArrival,
    HelpArrives,
    NeedleDecompression,
    ConvertToOpen,
    DrugAdmin { drug: String, dose: f64 },
}

impl InterventionAction {
    /// Role-permission table: the nurse drives simulation flow (timeout,
    /// equipment, help), the anesthesiologist administers drugs, the surgeon
    /// performs procedural interventions.
    pub fn permitted_role(&self) -> Role {
        match self {
            InterventionAction::Timeout
            | InterventionAction::EquipmentArrival
            | InterventionAction::HelpArrives => Role::Nurse,
            InterventionAction::DrugAdmin { .. } => Role::Anesthesiologist,
            InterventionAction::NeedleDecompression | InterventionAction::ConvertToOpen => {
                Role::Surgeon
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            InterventionAction::Timeout => "initiated the timeout".into(),
            InterventionAction::EquipmentArrival => "requested equipment".into(),
            InterventionAction::HelpArrives => "called for help".into(),
            InterventionAction::NeedleDecompression => "performed needle decompression".into(),
            InterventionAction::ConvertToOpen => "decided to convert to open".into(),
            InterventionAction::DrugAdmin { drug, dose } => {
                format!("administered {drug} (dose {dose})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectCode {
    RoleTaken,
    SessionFull,
    NoSuchSession,
    RoleViolation,
    InvalidIntervention,
    SessionClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSyncReqPayload {
    /// Sender-local microseconds at transmission.
    pub t1: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSyncRespPayload {
    pub t1: i64,
    /// Responder-local microseconds at receipt.
    pub t2: i64,
    /// Responder-local microseconds at reply transmission.
    pub t3: i64,
}

/// End-of-session stream upload. Timestamps are in the client's local clock;
/// the server converts them to session-relative seconds using `offset_us`
/// (server clock minus client clock, estimated by the client from its
/// time-sync exchanges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptUploadPayload {
    pub role: Role,
    pub offset_us: i64,
    #[serde(flatten)]
    pub records: StreamRecords,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamRecords {
    pub utterances: Vec<UploadUtterance>,
    pub actions: Vec<UploadAction>,
    pub gaze: Vec<UploadGaze>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadUtterance {
    pub t_us: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asr_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadAction {
    pub t_us: i64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadGaze {
    pub t_us: i64,
    pub direction: [f32; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEndPayload {
    /// Set by the server: the last authoritative version ever broadcast.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_version: Option<u64>,
}

/// Tracks the highest `seq` seen per sender, for idempotent delivery.
#[derive(Debug, Default)]
pub struct SeqTracker {
    last: HashMap<u64, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqCheck {
    Fresh,
    DuplicateOrStale,
}

impl SeqTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, sender: u64, seq: u64) -> SeqCheck {
        match self.last.get(&sender) {
            Some(last) if seq <= *last => SeqCheck::DuplicateOrStale,
            _ => {
                self.last.insert(sender, seq);
                SeqCheck::Fresh
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permission_table_is_exact() {
        assert_eq!(InterventionAction::Timeout.permitted_role(), Role::Nurse);
        assert_eq!(InterventionAction::EquipmentArrival.permitted_role(), Role::Nurse);
        assert_eq!(InterventionAction::HelpArrives.permitted_role(), Role::Nurse);
        assert_eq!(
            InterventionAction::DrugAdmin { drug: "epinephrine".into(), dose: 1.0 }.permitted_role(),
            Role::Anesthesiologist
        );
        assert_eq!(InterventionAction::NeedleDecompression.permitted_role(), Role::Surgeon);
        assert_eq!(InterventionAction::ConvertToOpen.permitted_role(), Role::Surgeon);
    }

    #[test]
    fn seq_tracker_flags_duplicates_per_sender() {
        let mut tracker = SeqTracker::new();
        assert_eq!(tracker.observe(1, 1), SeqCheck::Fresh);
        assert_eq!(tracker.observe(1, 2), SeqCheck::Fresh);
        assert_eq!(tracker.observe(1, 2), SeqCheck::DuplicateOrStale);
        assert_eq!(tracker.observe(1, 1), SeqCheck::DuplicateOrStale);
        assert_eq!(tracker.observe(2, 1), SeqCheck::Fresh);
    }
}
