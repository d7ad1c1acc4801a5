//! Per-node network metrics and cross-session aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use vortex_core::Role;

use super::InteractionGraph;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DegreeCount {
    pub in_degree: usize,
    pub out_degree: usize,
}

/// Multigraph degree counts: every edge is one communication event, so
/// `sum(in) == sum(out) == |edges|`.
pub fn degrees(g: &InteractionGraph) -> BTreeMap<Role, DegreeCount> {
    let mut out: BTreeMap<Role, DegreeCount> =
        g.nodes().iter().map(|r| (*r, DegreeCount::default())).collect();
    for e in g.edges() {
        out.get_mut(&e.source).expect("endpoint is a node").out_degree += 1;
        out.get_mut(&e.target).expect("endpoint is a node").in_degree += 1;
    }
    out
}

/// Local clustering coefficient on the simple undirected projection
/// (direction and multi-edges collapsed). Nodes with fewer than two
/// neighbors score 0.
pub fn clustering(g: &InteractionGraph) -> BTreeMap<Role, f64> {
    let mut neighbors: BTreeMap<Role, BTreeSet<Role>> =
        g.nodes().iter().map(|r| (*r, BTreeSet::new())).collect();
    for e in g.edges() {
        neighbors.get_mut(&e.source).unwrap().insert(e.target);
        neighbors.get_mut(&e.target).unwrap().insert(e.source);
    }
    let linked = |a: Role, b: Role| neighbors[&a].contains(&b);

    let mut out = BTreeMap::new();
    for (&node, nbrs) in &neighbors {
        let nbrs: Vec<Role> = nbrs.iter().copied().collect();
        let k = nbrs.len();
        if k < 2 {
            out.insert(node, 0.0);
            continue;
        }
        let mut present = 0usize;
        for i in 0..k {
            for j in (i + 1)..k {
                if linked(nbrs[i], nbrs[j]) {
                    present += 1;
                }
            }
        }
        let possible = k * (k - 1) / 2;
        out.insert(node, present as f64 / possible as f64);
    }
    out
}

/// Mean and sample standard deviation of one metric across sessions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    /// `None` with fewer than two observations.
    pub sd: Option<f64>,
}

impl MetricSummary {
    fn from_samples(samples: &[f64]) -> MetricSummary {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sd = if n >= 2 {
            let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
            Some((ss / (n - 1) as f64).sqrt())
        } else {
            None
        };
        MetricSummary { mean, sd }
    }

    /// `"3.84 ±1.77"`-style rendering; an undefined SD renders as a dash.
    pub fn render(&self) -> String {
        match self.sd {
            Some(sd) => format!("{:.2} ±{:.2}", self.mean, sd),
            None => format!("{:.2} ±—", self.mean),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoleMetrics {
    pub in_degree: MetricSummary,
    pub out_degree: MetricSummary,
    pub clustering: MetricSummary,
}

/// Per-role mean ± SD of in-degree, out-degree and clustering coefficient
/// across a set of session graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleMetricsSummary {
    pub graphs: usize,
    pub per_role: BTreeMap<Role, RoleMetrics>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no graphs to aggregate")]
    NoData,
}

pub fn aggregate_by_role(graphs: &[InteractionGraph]) -> Result<RoleMetricsSummary, MetricsError> {
    if graphs.is_empty() {
        return Err(MetricsError::NoData);
    }
    let mut in_samples: BTreeMap<Role, Vec<f64>> = BTreeMap::new();
    let mut out_samples: BTreeMap<Role, Vec<f64>> = BTreeMap::new();
    let mut cc_samples: BTreeMap<Role, Vec<f64>> = BTreeMap::new();
    for g in graphs {
        let deg = degrees(g);
        let cc = clustering(g);
        for role in g.nodes().iter().copied() {
            in_samples.entry(role).or_default().push(deg[&role].in_degree as f64);
            out_samples.entry(role).or_default().push(deg[&role].out_degree as f64);
            cc_samples.entry(role).or_default().push(cc[&role]);
        }
    }
    let per_role = in_samples
        .keys()
        .map(|&role| {
            (
                role,
                RoleMetrics {
                    in_degree: MetricSummary::from_samples(&in_samples[&role]),
                    out_degree: MetricSummary::from_samples(&out_samples[&role]),
                    clustering: MetricSummary::from_samples(&cc_samples[&role]),
                },
            )
        })
        .collect();
    Ok(RoleMetricsSummary { graphs: graphs.len(), per_role })
}

impl fmt::Display for RoleMetricsSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<18} {:>14} {:>14} {:>14}", "", "In-Degree", "Out-Degree", "Clustering")?;
        for (role, m) in &self.per_role {
            writeln!(
                f,
                "{:<18} {:>14} {:>14} {:>14}",
                role.as_str(),
                m.in_degree.render(),
                m.out_degree.render(),
                m.clustering.render()
            )?;
        }
        write!(f, "n = {} graph(s)", self.graphs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::InteractionEdge;
    use vortex_core::NotssCategory;

    fn edge(source: Role, target: Role, category: NotssCategory, t: u32) -> InteractionEdge {
        InteractionEdge {
            source,
            target,
            category,
            t,
            rationale: format!("{} event", vortex_core::format_timestamp(t)),
        }
    }

    /// The worked five-edge session used across the metric tests.
    pub(crate) fn five_edge_graph() -> InteractionGraph {
        use NotssCategory::*;
        use Role::*;
        InteractionGraph::over_full_roster(vec![
            edge(Surgeon, Nurse, CommunicationTeamwork, 5653),
            edge(Nurse, Surgeon, SituationalAwareness, 5738),
            edge(Surgeon, Anesthesiologist, SituationalAwareness, 5829),
            edge(Anesthesiologist, Nurse, DecisionMaking, 5880),
            edge(Nurse, Anesthesiologist, Leadership, 5910),
        ])
        .unwrap()
    }

    #[test]
    fn empty_graph_has_zero_degrees() {
        let g = InteractionGraph::over_full_roster(vec![]).unwrap();
        let d = degrees(&g);
        assert!(d.values().all(|c| c.in_degree == 0 && c.out_degree == 0));
        assert!(clustering(&g).values().all(|c| *c == 0.0));
    }

    #[test]
    fn five_edge_graph_matches_hand_counts() {
        let g = five_edge_graph();
        let d = degrees(&g);
        assert_eq!((d[&Role::Surgeon].in_degree, d[&Role::Surgeon].out_degree), (1, 2));
        assert_eq!((d[&Role::Nurse].in_degree, d[&Role::Nurse].out_degree), (2, 2));
        assert_eq!(
            (d[&Role::Anesthesiologist].in_degree, d[&Role::Anesthesiologist].out_degree),
            (2, 1)
        );
        let cc = clustering(&g);
        assert!(cc.values().all(|c| *c == 1.0), "{cc:?}");
    }

    #[test]
    fn path_graph_scores_zero_everywhere() {
        use NotssCategory::*;
        use Role::*;
        let g = InteractionGraph::over_full_roster(vec![
            edge(Surgeon, Nurse, Leadership, 10),
            edge(Nurse, Anesthesiologist, Leadership, 20),
        ])
        .unwrap();
        let cc = clustering(&g);
        assert!(cc.values().all(|c| *c == 0.0), "{cc:?}");
    }

    #[test]
    fn identical_graphs_aggregate_with_zero_sd() {
        let g = five_edge_graph();
        let summary = aggregate_by_role(&[g.clone(), g]).unwrap();
        for m in summary.per_role.values() {
            assert_eq!(m.in_degree.sd, Some(0.0));
            assert_eq!(m.out_degree.sd, Some(0.0));
            assert_eq!(m.clustering.sd, Some(0.0));
        }
    }

    #[test]
    fn single_graph_has_undefined_sd() {
        let summary = aggregate_by_role(&[five_edge_graph()]).unwrap();
        let surgeon = &summary.per_role[&Role::Surgeon];
        assert_eq!(surgeon.in_degree.mean, 1.0);
        assert_eq!(surgeon.in_degree.sd, None);
        assert!(surgeon.in_degree.render().ends_with('—'));
    }

    #[test]
    fn aggregate_of_nothing_is_no_data() {
        assert_eq!(aggregate_by_role(&[]), Err(MetricsError::NoData));
    }

    #[test]
    fn render_matches_reported_style() {
        let s = MetricSummary { mean: 3.84, sd: Some(1.77) };
        assert_eq!(s.render(), "3.84 ±1.77");
    }
}
