use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Operating-room team roles. A session roster holds each role at most once.
///
/// The declaration order (`Surgeon`, `Anesthesiologist`, `Nurse`) is the
/// canonical roster order and is used wherever entries need a deterministic
/// tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Surgeon,
    Anesthesiologist,
    Nurse,
}

impl Role {
    /// All roles in canonical roster order.
    pub const ALL: [Role; 3] = [Role::Surgeon, Role::Anesthesiologist, Role::Nurse];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Surgeon => "Surgeon",
            Role::Anesthesiologist => "Anesthesiologist",
            Role::Nurse => "Nurse",
        }
    }

    /// Case-insensitive lookup by display name (surrounding whitespace ignored).
    pub fn from_label(label: &str) -> Option<Role> {
        let label = label.trim();
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(label))
    }

    /// Position within the canonical roster order.
    pub fn order_index(&self) -> usize {
        Role::ALL.iter().position(|r| r == self).unwrap()
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown role: {0:?}")]
pub struct UnknownRole(pub String);

impl FromStr for Role {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::from_label(s).ok_or_else(|| UnknownRole(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_lookup_is_case_insensitive() {
        assert_eq!(Role::from_label("surgeon"), Some(Role::Surgeon));
        assert_eq!(Role::from_label("  NURSE "), Some(Role::Nurse));
        assert_eq!(Role::from_label("Technician"), None);
    }

    #[test]
    fn canonical_order_is_stable() {
        assert!(Role::Surgeon < Role::Anesthesiologist);
        assert!(Role::Anesthesiologist < Role::Nurse);
        assert_eq!(Role::Surgeon.order_index(), 0);
        assert_eq!(Role::Nurse.order_index(), 2);
    }
}
