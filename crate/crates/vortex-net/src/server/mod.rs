//! The central coordination node: admits clients, owns the physiology
//! engine, broadcasts authoritative state over the reliable channel, relays
//! pose datagrams with latest-wins semantics, and emits a session archive.

mod relay;
mod session;

pub use relay::PoseRelayStats;
pub use session::{spawn_session, ServerConfig, ServerError, ServerHandle, SessionSummary};

/// Current wall clock in microseconds since the Unix epoch.
pub(crate) fn wall_us() -> i64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_micros() as i64)
        .unwrap_or(0)
}
