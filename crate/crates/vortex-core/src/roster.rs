use serde::{Deserialize, Serialize};

use crate::role::Role;

/// One admitted participant. The display alias is the anonymized label under
/// which the participant appears everywhere downstream; real identities are
/// never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub client_id: u32,
    pub role: Role,
    pub display_alias: String,
}

/// Anonymized session roster. Client ids and roles are unique, and entries
/// are kept in canonical role order so that tie-breaks over the roster are
/// independent of join order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RosterEntry>", into = "Vec<RosterEntry>")]
pub struct SessionRoster {
    entries: Vec<RosterEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RosterError {
    #[error("role {0} already present in roster")]
    DuplicateRole(Role),
    #[error("client id {0} already present in roster")]
    DuplicateClientId(u32),
}

impl SessionRoster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<RosterEntry>) -> Result<Self, RosterError> {
        let mut roster = Self::new();
        for e in entries {
            roster.add_entry(e)?;
        }
        Ok(roster)
    }

    /// Admit a client under `role`. The alias is the role name, since each
    /// role occurs at most once per session.
    pub fn add(&mut self, client_id: u32, role: Role) -> Result<&RosterEntry, RosterError> {
        self.add_entry(RosterEntry {
            client_id,
            role,
            display_alias: role.as_str().to_string(),
        })
    }

    fn add_entry(&mut self, entry: RosterEntry) -> Result<&RosterEntry, RosterError> {
        if self.entries.iter().any(|e| e.role == entry.role) {
            return Err(RosterError::DuplicateRole(entry.role));
        }
        if self.entries.iter().any(|e| e.client_id == entry.client_id) {
            return Err(RosterError::DuplicateClientId(entry.client_id));
        }
        let pos = self
            .entries
            .iter()
            .position(|e| e.role > entry.role)
            .unwrap_or(self.entries.len());
        self.entries.insert(pos, entry);
        Ok(&self.entries[pos])
    }

    pub fn entries(&self) -> &[RosterEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == Role::ALL.len()
    }

    pub fn contains_role(&self, role: Role) -> bool {
        self.entries.iter().any(|e| e.role == role)
    }

    pub fn get(&self, role: Role) -> Option<&RosterEntry> {
        self.entries.iter().find(|e| e.role == role)
    }

    pub fn by_client_id(&self, client_id: u32) -> Option<&RosterEntry> {
        self.entries.iter().find(|e| e.client_id == client_id)
    }

    pub fn alias_for(&self, role: Role) -> Option<&str> {
        self.get(role).map(|e| e.display_alias.as_str())
    }

    /// Resolve a display alias back to its role (case-insensitive, trimmed).
    pub fn resolve_alias(&self, label: &str) -> Option<Role> {
        let label = label.trim();
        self.entries
            .iter()
            .find(|e| e.display_alias.eq_ignore_ascii_case(label))
            .map(|e| e.role)
    }

    pub fn roles(&self) -> impl Iterator<Item = Role> + '_ {
        self.entries.iter().map(|e| e.role)
    }
}

impl TryFrom<Vec<RosterEntry>> for SessionRoster {
    type Error = RosterError;

    fn try_from(entries: Vec<RosterEntry>) -> Result<Self, Self::Error> {
        Self::from_entries(entries)
    }
}

impl From<SessionRoster> for Vec<RosterEntry> {
    fn from(roster: SessionRoster) -> Self {
        roster.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_roster() -> SessionRoster {
        let mut r = SessionRoster::new();
        r.add(2, Role::Nurse).unwrap();
        r.add(1, Role::Surgeon).unwrap();
        r.add(3, Role::Anesthesiologist).unwrap();
        r
    }

    #[test]
    fn duplicate_role_is_rejected() {
        let mut r = SessionRoster::new();
        r.add(1, Role::Surgeon).unwrap();
        assert_eq!(r.add(2, Role::Surgeon), Err(RosterError::DuplicateRole(Role::Surgeon)));
    }

    #[test]
    fn duplicate_client_id_is_rejected() {
        let mut r = SessionRoster::new();
        r.add(1, Role::Surgeon).unwrap();
        assert_eq!(r.add(1, Role::Nurse), Err(RosterError::DuplicateClientId(1)));
    }

    #[test]
    fn entries_are_kept_in_canonical_role_order() {
        let r = full_roster();
        let roles: Vec<Role> = r.roles().collect();
        assert_eq!(roles, vec![Role::Surgeon, Role::Anesthesiologist, Role::Nurse]);
    }

    #[test]
    fn aliases_are_role_names() {
        let r = full_roster();
        assert_eq!(r.alias_for(Role::Nurse), Some("Nurse"));
        assert_eq!(r.resolve_alias("  surgeon "), Some(Role::Surgeon));
        assert_eq!(r.resolve_alias("Technician"), None);
    }

    #[test]
    fn serde_round_trip_preserves_roster() {
        let r = full_roster();
        let json = serde_json::to_string(&r).unwrap();
        let back: SessionRoster = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn deserializing_duplicate_roles_fails() {
        let json = r#"[
            {"client_id": 1, "role": "Surgeon", "display_alias": "Surgeon"},
            {"client_id": 2, "role": "Surgeon", "display_alias": "Surgeon"}
        ]"#;
        assert!(serde_json::from_str::<SessionRoster>(json).is_err());
    }
}
