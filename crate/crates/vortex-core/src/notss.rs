use std::fmt;

use serde::{Deserialize, Serialize};

/// The four non-technical-skill domains used to label interaction edges.
///
/// The set is closed: anything that does not resolve to one of these four
/// values is a category violation, never a guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NotssCategory {
    SituationalAwareness,
    DecisionMaking,
    CommunicationTeamwork,
    Leadership,
}

impl NotssCategory {
    pub const ALL: [NotssCategory; 4] = [
        NotssCategory::SituationalAwareness,
        NotssCategory::DecisionMaking,
        NotssCategory::CommunicationTeamwork,
        NotssCategory::Leadership,
    ];

    /// Canonical human-readable name, as used in edge labels and exports.
    pub fn canonical_name(&self) -> &'static str {
        match self {
            NotssCategory::SituationalAwareness => "Situational Awareness",
            NotssCategory::DecisionMaking => "Decision Making",
            NotssCategory::CommunicationTeamwork => "Communication and Teamwork",
            NotssCategory::Leadership => "Leadership",
        }
    }

    /// Fuzzy label resolution over the four canonical names.
    ///
    /// Matching is case-insensitive and ignores punctuation, whitespace and
    /// the connective "and", so `"Communication & Teamwork"`,
    /// `"communication and teamwork"` and `"CommunicationTeamwork"` all
    /// resolve to [`NotssCategory::CommunicationTeamwork`]. Labels outside
    /// the set resolve to `None`.
    pub fn from_label(label: &str) -> Option<NotssCategory> {
        let needle = normalize(label);
        if needle.is_empty() {
            return None;
        }
        NotssCategory::ALL
            .into_iter()
            .find(|c| normalize(c.canonical_name()) == needle)
    }
}

impl fmt::Display for NotssCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

fn normalize(s: &str) -> String {
    let folded: String = s
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    folded.replace("and", "")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuzzy_matching_accepts_canonical_variants() {
        for (label, expected) in [
            ("Communication and Teamwork", NotssCategory::CommunicationTeamwork),
            ("communication & teamwork", NotssCategory::CommunicationTeamwork),
            ("CommunicationTeamwork", NotssCategory::CommunicationTeamwork),
            ("Situational Awareness", NotssCategory::SituationalAwareness),
            ("decision-making", NotssCategory::DecisionMaking),
            ("LEADERSHIP", NotssCategory::Leadership),
        ] {
            assert_eq!(NotssCategory::from_label(label), Some(expected), "{label}");
        }
    }

    #[test]
    fn unknown_labels_do_not_resolve() {
        for label in ["Empathy", "Teamwork and Communication skills", "", "  "] {
            assert_eq!(NotssCategory::from_label(label), None, "{label:?}");
        }
    }
}
