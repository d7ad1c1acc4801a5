//! Graph exporters behind a format registry: canonical JSON, Graphviz DOT,
//! and GraphML, selected by name at runtime.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use vortex_core::json::to_canonical_vec;

use super::InteractionGraph;

pub trait GraphExporter: Send + Sync {
    fn format(&self) -> &'static str;
    fn export(&self, graph: &InteractionGraph) -> Vec<u8>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExportError {
    #[error("unsupported export format {0:?} (available: {1})")]
    UnsupportedFormat(String, String),
}

/// Registry of exporters keyed by format name.
pub struct ExporterRegistry {
    exporters: BTreeMap<&'static str, Box<dyn GraphExporter>>,
}

impl ExporterRegistry {
    pub fn empty() -> Self {
        Self { exporters: BTreeMap::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(CanonicalJsonExporter));
        r.register(Box::new(DotExporter));
        r.register(Box::new(GraphmlExporter));
        r
    }

    pub fn register(&mut self, exporter: Box<dyn GraphExporter>) {
        self.exporters.insert(exporter.format(), exporter);
    }

    pub fn formats(&self) -> Vec<&'static str> {
        self.exporters.keys().copied().collect()
    }

    pub fn export(&self, graph: &InteractionGraph, format: &str) -> Result<Vec<u8>, ExportError> {
        match self.exporters.get(format) {
            Some(e) => Ok(e.export(graph)),
            None => Err(ExportError::UnsupportedFormat(
                format.to_string(),
                self.formats().join(", "),
            )),
        }
    }
}

/// Export with the default registry.
pub fn export_graph(graph: &InteractionGraph, format: &str) -> Result<Vec<u8>, ExportError> {
    ExporterRegistry::with_defaults().export(graph, format)
}

/// Canonical JSON in the same document shape the validator consumes, so an
/// exported graph re-imports losslessly and re-exports byte-identically.
pub struct CanonicalJsonExporter;

impl GraphExporter for CanonicalJsonExporter {
    fn format(&self) -> &'static str {
        "json"
    }

    fn export(&self, graph: &InteractionGraph) -> Vec<u8> {
        to_canonical_vec(&graph.to_document()).expect("graph document serializes")
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub struct DotExporter;

impl GraphExporter for DotExporter {
    fn format(&self) -> &'static str {
        "dot"
    }

    fn export(&self, graph: &InteractionGraph) -> Vec<u8> {
        let mut out = String::new();
        out.push_str("digraph interaction {\n");
        out.push_str("  rankdir=LR;\n");
        for node in graph.nodes() {
            let _ = writeln!(out, "  \"{}\";", node.as_str());
        }
        for e in graph.edges() {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\", timestamp=\"{}\", tooltip=\"{}\"];",
                e.source.as_str(),
                e.target.as_str(),
                dot_escape(e.category.canonical_name()),
                e.timestamp_text(),
                dot_escape(&e.description_text()),
            );
        }
        out.push_str("}\n");
        out.into_bytes()
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub struct GraphmlExporter;

impl GraphExporter for GraphmlExporter {
    fn format(&self) -> &'static str {
        "graphml"
    }

    fn export(&self, graph: &InteractionGraph) -> Vec<u8> {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str(concat!(
            "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\"",
            " xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\"",
            " xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns",
            " http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n"
        ));
        out.push_str("  <key id=\"category\" for=\"edge\" attr.name=\"category\" attr.type=\"string\"/>\n");
        out.push_str("  <key id=\"timestamp\" for=\"edge\" attr.name=\"timestamp\" attr.type=\"string\"/>\n");
        out.push_str("  <key id=\"rationale\" for=\"edge\" attr.name=\"rationale\" attr.type=\"string\"/>\n");
        out.push_str("  <graph id=\"interaction\" edgedefault=\"directed\">\n");
        for node in graph.nodes() {
            let _ = writeln!(out, "    <node id=\"{}\"/>", xml_escape(node.as_str()));
        }
        for (i, e) in graph.edges().iter().enumerate() {
            let _ = writeln!(
                out,
                "    <edge id=\"e{i}\" source=\"{}\" target=\"{}\">",
                xml_escape(e.source.as_str()),
                xml_escape(e.target.as_str()),
            );
            let _ = writeln!(
                out,
                "      <data key=\"category\">{}</data>",
                xml_escape(e.category.canonical_name())
            );
            let _ = writeln!(out, "      <data key=\"timestamp\">{}</data>", e.timestamp_text());
            let _ = writeln!(
                out,
                "      <data key=\"rationale\">{}</data>",
                xml_escape(&e.description_text())
            );
            out.push_str("    </edge>\n");
        }
        out.push_str("  </graph>\n");
        out.push_str("</graphml>\n");
        out.into_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::InteractionEdge;
    use vortex_core::{NotssCategory, Role};

    fn single_edge_graph() -> InteractionGraph {
        InteractionGraph::over_full_roster(vec![InteractionEdge {
            source: Role::Surgeon,
            target: Role::Nurse,
            category: NotssCategory::CommunicationTeamwork,
            t: 5653,
            rationale: "1:34:13 initiated the timeout and confirmed the procedure".into(),
        }])
        .unwrap()
    }

    #[test]
    fn unknown_format_is_rejected() {
        let g = single_edge_graph();
        assert!(matches!(
            export_graph(&g, "gexf"),
            Err(ExportError::UnsupportedFormat(..))
        ));
    }

    #[test]
    fn dot_output_matches_golden_fixture() {
        let g = single_edge_graph();
        let dot = String::from_utf8(export_graph(&g, "dot").unwrap()).unwrap();
        let golden = include_str!("../../assets/golden/single_edge.dot");
        assert_eq!(dot, golden);
    }

    #[test]
    fn canonical_json_round_trip_is_byte_stable() {
        let g = single_edge_graph();
        let first = export_graph(&g, "json").unwrap();
        let reloaded = InteractionGraph::from_canonical_json(&first).unwrap();
        let second = export_graph(&reloaded, "json").unwrap();
        assert_eq!(first, second);
        assert_eq!(reloaded, g);
    }

    #[test]
    fn round_trip_stabilizes_untimestamped_rationales() {
        let g = InteractionGraph::over_full_roster(vec![InteractionEdge {
            source: Role::Anesthesiologist,
            target: Role::Surgeon,
            category: NotssCategory::DecisionMaking,
            t: 120,
            rationale: "suggested conversion".into(),
        }])
        .unwrap();
        let first = export_graph(&g, "json").unwrap();
        let reloaded = InteractionGraph::from_canonical_json(&first).unwrap();
        assert_eq!(reloaded.edges()[0].t, 120);
        assert_eq!(reloaded.edges()[0].rationale, "0:02:00 suggested conversion");
        let second = export_graph(&reloaded, "json").unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn graphml_is_structurally_sound() {
        let mut edges = Vec::new();
        for (i, (s, t)) in [
            (Role::Surgeon, Role::Nurse),
            (Role::Nurse, Role::Anesthesiologist),
            (Role::Anesthesiologist, Role::Surgeon),
        ]
        .iter()
        .enumerate()
        {
            edges.push(InteractionEdge {
                source: *s,
                target: *t,
                category: NotssCategory::Leadership,
                t: 60 * (i as u32 + 1),
                rationale: format!("0:0{}:00 said \"go\" & <pointed>", i + 1),
            });
        }
        let g = InteractionGraph::over_full_roster(edges).unwrap();
        let xml = String::from_utf8(export_graph(&g, "graphml").unwrap()).unwrap();

        // Well-formedness of the fixed shape we emit: balanced tags, every
        // edge endpoint declared, and no raw markup characters in data.
        assert_eq!(xml.matches("<edge ").count(), 3);
        assert_eq!(xml.matches("</edge>").count(), 3);
        assert_eq!(xml.matches("<node ").count(), 3);
        assert_eq!(xml.matches("<data ").count(), xml.matches("</data>").count());
        assert!(xml.contains("edgedefault=\"directed\""));
        for role in Role::ALL {
            assert!(xml.contains(&format!("<node id=\"{}\"/>", role.as_str())));
        }
        assert!(xml.contains("&quot;go&quot; &amp; &lt;pointed&gt;"));
        assert!(!xml.contains("<pointed>"));
    }
}
