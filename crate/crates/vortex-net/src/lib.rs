//! Hybrid transport for multi-user sessions: length-prefixed reliable frames
//! for critical state, fixed-layout datagrams for high-frequency pose/gaze
//! streams, clock-offset estimation, the central session server, scripted
//! bot clients, and a deterministic network fault injector.

pub mod archive;
pub mod bot;
pub mod fault;
pub mod protocol;
pub mod server;

pub use archive::{load_archive, write_archive, ArchiveError, ClientStream, RttStats, SessionArchive};
pub use bot::{run_bot, BotAction, BotActionKind, BotConfig, BotError, BotReport, BotScript};
pub use fault::{FaultInjector, LatencyModel, NetProfile, ProfileError};
pub use protocol::{
    decode_frame, decode_pose, encode_frame, encode_pose, estimate_clock_offset, AuthoritativeState,
    BodyPose, FrameDecoder, FrameError, InterventionAction, JoinAckPayload, JoinPayload, MessageBody,
    PoseError, PoseUpdate, RejectCode, ReliableEnvelope, SeqTracker, SessionEndPayload, SessionEvent,
    StateSnapshotPayload, TimeSyncError, TimeSyncSample, TranscriptUploadPayload, MAX_FRAME_LEN,
    POSE_LEN,
};
pub use server::{spawn_session, PoseRelayStats, ServerConfig, ServerError, ServerHandle, SessionSummary};
