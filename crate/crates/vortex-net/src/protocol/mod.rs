//! Bit-exact codecs for the wire contract. Reliable frames are a 4-byte
//! big-endian length prefix followed by a canonical-JSON envelope; pose
//! datagrams are a fixed 117-byte big-endian layout. See `docs/protocol.md`
//! for golden byte dumps.

mod envelope;
mod framing;
mod pose;
mod timesync;

pub use envelope::{
    AuthoritativeState, InterventionAction, JoinAckPayload, JoinPayload, MessageBody, RejectCode,
    ReliableEnvelope, SeqCheck, SeqTracker, SessionEndPayload, SessionEvent, StateSnapshotPayload,
    StreamRecords, TimeSyncReqPayload, TimeSyncRespPayload, TranscriptUploadPayload, UploadAction,
    UploadGaze, UploadUtterance,
};
pub use framing::{decode_frame, encode_frame, validate_seq_monotonic, FrameDecoder, FrameError, MAX_FRAME_LEN};
pub use pose::{decode_pose, encode_pose, BodyPose, PoseError, PoseUpdate, POSE_LEN, POSE_MAGIC, POSE_VERSION};
pub use timesync::{estimate_clock_offset, TimeSyncError, TimeSyncSample};
