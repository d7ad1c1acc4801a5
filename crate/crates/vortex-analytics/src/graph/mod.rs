//! Validated directed interaction multigraphs and their network metrics.

pub mod export;
pub mod metrics;

use serde_json::Value;
use vortex_core::{format_timestamp, parse_timestamp, NotssCategory, Role};

pub use export::{export_graph, ExportError, ExporterRegistry, GraphExporter};
pub use metrics::{aggregate_by_role, clustering, degrees, DegreeCount, MetricsError, RoleMetricsSummary};

/// One observed interaction: who demonstrated which skill toward whom, when,
/// and the grounding text. Self-edges are not representable by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionEdge {
    pub source: Role,
    pub target: Role,
    pub category: NotssCategory,
    /// Session-relative whole seconds, as carried in edge descriptions.
    pub t: u32,
    /// The full edge description, which embeds the `H:MM:SS` timestamp.
    pub rationale: String,
}

/// Directed multigraph over the session roster. Repeated (source, target)
/// pairs are allowed: each edge is one communication event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    nodes: Vec<Role>,
    edges: Vec<InteractionEdge>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("edge {index}: self-edge {role} -> {role} not allowed")]
    SelfEdge { index: usize, role: Role },
    #[error("edge {index}: endpoint {role} is not a node of this graph")]
    UnknownEndpoint { index: usize, role: Role },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphLoadError {
    #[error("graph document is not valid JSON: {0}")]
    Json(String),
    #[error("graph document missing `{0}` array")]
    MissingField(&'static str),
    #[error("node {0}: {1}")]
    BadNode(usize, String),
    #[error("edge {0}: {1}")]
    BadEdge(usize, String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl InteractionGraph {
    /// Build a graph over `nodes`; edges are sorted by timestamp (input
    /// order preserved among ties).
    pub fn new(nodes: Vec<Role>, mut edges: Vec<InteractionEdge>) -> Result<Self, GraphError> {
        for (index, e) in edges.iter().enumerate() {
            if e.source == e.target {
                return Err(GraphError::SelfEdge { index, role: e.source });
            }
            for role in [e.source, e.target] {
                if !nodes.contains(&role) {
                    return Err(GraphError::UnknownEndpoint { index, role });
                }
            }
        }
        edges.sort_by_key(|e| e.t);
        Ok(Self { nodes, edges })
    }

    /// The standard three-role graph.
    pub fn over_full_roster(edges: Vec<InteractionEdge>) -> Result<Self, GraphError> {
        Self::new(Role::ALL.to_vec(), edges)
    }

    pub fn nodes(&self) -> &[Role] {
        &self.nodes
    }

    pub fn edges(&self) -> &[InteractionEdge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical JSON document shape: `{"edges": [...], "nodes": [...]}` with
    /// each edge carrying `source`, `target`, `label` (canonical category
    /// name) and `description`.
    pub fn to_document(&self) -> Value {
        let nodes: Vec<Value> = self.nodes.iter().map(|r| Value::from(r.as_str())).collect();
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "source": e.source.as_str(),
                    "target": e.target.as_str(),
                    "label": e.category.canonical_name(),
                    "description": e.description_text(),
                })
            })
            .collect();
        serde_json::json!({ "nodes": nodes, "edges": edges })
    }

    /// Structural load of a canonical graph document: schema shape, role
    /// resolution, category resolution and timestamp parsing. The temporal
    /// window safeguard needs the session transcript and lives in
    /// [`crate::validate::validate_graph`].
    pub fn from_canonical_json(bytes: &[u8]) -> Result<Self, GraphLoadError> {
        let doc: Value =
            serde_json::from_slice(bytes).map_err(|e| GraphLoadError::Json(e.to_string()))?;
        let nodes_v = doc
            .get("nodes")
            .and_then(Value::as_array)
            .ok_or(GraphLoadError::MissingField("nodes"))?;
        let edges_v = doc
            .get("edges")
            .and_then(Value::as_array)
            .ok_or(GraphLoadError::MissingField("edges"))?;

        let mut nodes = Vec::new();
        for (i, n) in nodes_v.iter().enumerate() {
            let label = n
                .as_str()
                .ok_or_else(|| GraphLoadError::BadNode(i, "node label must be a string".into()))?;
            let role = Role::from_label(label)
                .ok_or_else(|| GraphLoadError::BadNode(i, format!("unknown role {label:?}")))?;
            if !nodes.contains(&role) {
                nodes.push(role);
            }
        }
        nodes.sort();

        let mut edges = Vec::new();
        for (i, e) in edges_v.iter().enumerate() {
            let field = |name: &str| -> Result<&str, GraphLoadError> {
                e.get(name)
                    .and_then(Value::as_str)
                    .ok_or_else(|| GraphLoadError::BadEdge(i, format!("missing string field {name:?}")))
            };
            let source = Role::from_label(field("source")?)
                .ok_or_else(|| GraphLoadError::BadEdge(i, "unknown source role".into()))?;
            let target = Role::from_label(field("target")?)
                .ok_or_else(|| GraphLoadError::BadEdge(i, "unknown target role".into()))?;
            let category = NotssCategory::from_label(field("label")?)
                .ok_or_else(|| GraphLoadError::BadEdge(i, "unknown category label".into()))?;
            let description = field("description")?;
            let t = find_timestamp(description)
                .ok_or_else(|| GraphLoadError::BadEdge(i, "no H:MM:SS timestamp in description".into()))?;
            edges.push(InteractionEdge {
                source,
                target,
                category,
                t,
                rationale: description.to_string(),
            });
        }
        for role in edges.iter().flat_map(|e| [e.source, e.target]) {
            if !nodes.contains(&role) {
                nodes.push(role);
            }
        }
        nodes.sort();
        Ok(Self::new(nodes, edges)?)
    }
}

impl InteractionEdge {
    /// Description rendered for exports: the rationale itself when it already
    /// carries a timestamp, otherwise prefixed with the canonical `H:MM:SS`.
    pub fn description_text(&self) -> String {
        if find_timestamp(&self.rationale).is_some() {
            self.rationale.clone()
        } else {
            format!("{} {}", format_timestamp(self.t), self.rationale)
        }
    }

    pub fn timestamp_text(&self) -> String {
        format_timestamp(self.t)
    }
}

/// First `H:MM:SS` (or `HH:MM:SS`) token in `text`, parsed to seconds.
pub fn find_timestamp(text: &str) -> Option<u32> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() && (i == 0 || !bytes[i - 1].is_ascii_digit()) {
            // Candidate start: up to two hour digits followed by :MM:SS.
            for hour_len in [2usize, 1] {
                let end = i + hour_len + 6;
                if end <= bytes.len() {
                    let candidate = &text[i..end];
                    // Reject when another digit immediately follows (e.g. 1:23:456).
                    if end < bytes.len() && bytes[end].is_ascii_digit() {
                        continue;
                    }
                    if let Ok(t) = parse_timestamp(candidate) {
                        return Some(t);
                    }
                }
            }
        }
        i += 1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_timestamps_inside_prose() {
        assert_eq!(find_timestamp("at 1:34:13 the surgeon called a timeout"), Some(5653));
        assert_eq!(find_timestamp("00:01:00 elapsed"), Some(60));
        assert_eq!(find_timestamp("no clock here"), None);
        assert_eq!(find_timestamp("ratio was 3:1"), None);
        assert_eq!(find_timestamp("minutes 0:70:00 invalid"), None);
    }

    #[test]
    fn self_edges_are_rejected() {
        let err = InteractionGraph::over_full_roster(vec![InteractionEdge {
            source: Role::Nurse,
            target: Role::Nurse,
            category: NotssCategory::Leadership,
            t: 10,
            rationale: "0:00:10 self talk".into(),
        }])
        .unwrap_err();
        assert!(matches!(err, GraphError::SelfEdge { .. }));
    }

    #[test]
    fn edges_are_ordered_by_time() {
        let mk = |t: u32| InteractionEdge {
            source: Role::Surgeon,
            target: Role::Nurse,
            category: NotssCategory::Leadership,
            t,
            rationale: format!("{} x", format_timestamp(t)),
        };
        let g = InteractionGraph::over_full_roster(vec![mk(30), mk(10), mk(20)]).unwrap();
        let ts: Vec<u32> = g.edges().iter().map(|e| e.t).collect();
        assert_eq!(ts, vec![10, 20, 30]);
    }

    #[test]
    fn description_text_prepends_timestamp_only_when_missing() {
        let with = InteractionEdge {
            source: Role::Surgeon,
            target: Role::Nurse,
            category: NotssCategory::DecisionMaking,
            t: 5653,
            rationale: "1:34:13 decided to convert".into(),
        };
        assert_eq!(with.description_text(), "1:34:13 decided to convert");
        let without = InteractionEdge { rationale: "decided to convert".into(), ..with };
        assert_eq!(without.description_text(), "1:34:13 decided to convert");
    }
}
