//! Shared domain vocabulary: team roles, non-technical-skill categories,
//! session clocks and rosters, and the timestamp grammar used by every
//! other crate in the workspace.

pub mod json;
pub mod notss;
pub mod role;
pub mod roster;
pub mod time;

pub use notss::NotssCategory;
pub use role::Role;
pub use roster::{RosterEntry, RosterError, SessionRoster};
pub use time::{format_timestamp, parse_timestamp, SessionClock, TimestampError};
