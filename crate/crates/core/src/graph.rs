//! Immutable weighted graph snapshots shared by the filters, metrics and update generator.

use std::collections::{BTreeMap, BTreeSet, HashSet};

/// Canonical undirected edge key, smaller name first.
pub type EdgeKey = (String, String);

pub fn edge_key(a: &str, b: &str) -> EdgeKey {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// A weighted undirected graph with a per-node strength.
///
/// Strengths are carried as given by the producer (for filters they are the
/// sums over the full filtered graph), so an induced subgraph keeps the
/// strengths its nodes had in the parent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphView {
    nodes: BTreeMap<String, f64>,
    edges: BTreeMap<EdgeKey, f64>,
}

impl GraphView {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a view from node strengths and edges. Edges whose endpoints are
    /// missing from `nodes` are dropped.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = (String, f64)>,
        edges: impl IntoIterator<Item = (String, String, f64)>,
    ) -> Self {
        let nodes: BTreeMap<String, f64> = nodes.into_iter().collect();
        let edges = edges
            .into_iter()
            .filter(|(a, b, _)| a != b && nodes.contains_key(a) && nodes.contains_key(b))
            .map(|(a, b, w)| if a <= b { ((a, b), w) } else { ((b, a), w) })
            .collect();
        Self { nodes, edges }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains_node(&self, name: &str) -> bool {
        self.nodes.contains_key(name)
    }

    pub fn strength(&self, name: &str) -> Option<f64> {
        self.nodes.get(name).copied()
    }

    pub fn edge_weight(&self, a: &str, b: &str) -> Option<f64> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    /// Nodes in name order.
    pub fn nodes(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.nodes.iter().map(|(n, s)| (n.as_str(), *s))
    }

    /// Edges in canonical key order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.edges
            .iter()
            .map(|((a, b), w)| (a.as_str(), b.as_str(), *w))
    }

    pub fn node_names(&self) -> BTreeSet<&str> {
        self.nodes.keys().map(String::as_str).collect()
    }

    /// The `n` strongest node names, strongest first, ties broken by name.
    pub fn strongest(&self, n: usize) -> Vec<&str> {
        let mut ranked: Vec<(&str, f64)> = self.nodes().collect();
        ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        ranked.truncate(n);
        ranked.into_iter().map(|(name, _)| name).collect()
    }

    /// Subgraph induced by `keep`.
    pub fn induced<'a>(&self, keep: impl IntoIterator<Item = &'a str>) -> GraphView {
        let keep: HashSet<&str> = keep.into_iter().collect();
        let nodes = self
            .nodes
            .iter()
            .filter(|(n, _)| keep.contains(n.as_str()))
            .map(|(n, s)| (n.clone(), *s))
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|((a, b), _)| keep.contains(a.as_str()) && keep.contains(b.as_str()))
            .map(|(k, w)| (k.clone(), *w))
            .collect();
        GraphView { nodes, edges }
    }

    /// Subgraph induced by the `n` strongest nodes.
    pub fn top_subgraph(&self, n: usize) -> GraphView {
        if n >= self.nodes.len() {
            return self.clone();
        }
        let keep = self.strongest(n);
        self.induced(keep)
    }

    /// Same nodes, only edges strictly heavier than `min_weight`.
    pub fn with_edges_above(&self, min_weight: f64) -> GraphView {
        GraphView {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .filter(|(_, w)| **w > min_weight)
                .map(|(k, w)| (k.clone(), *w))
                .collect(),
        }
    }

    pub(crate) fn set_node(&mut self, name: &str, strength: f64) {
        self.nodes.insert(name.to_string(), strength);
    }

    pub(crate) fn remove_node(&mut self, name: &str) -> Option<f64> {
        self.nodes.remove(name)
    }

    pub(crate) fn set_edge(&mut self, a: &str, b: &str, weight: f64) {
        self.edges.insert(edge_key(a, b), weight);
    }

    pub(crate) fn remove_edge(&mut self, a: &str, b: &str) -> Option<f64> {
        self.edges.remove(&edge_key(a, b))
    }

    /// Whether any edge touches `name`.
    pub(crate) fn has_incident_edge(&self, name: &str) -> bool {
        self.edges.keys().any(|(a, b)| a == name || b == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> GraphView {
        GraphView::from_parts(
            [("a".into(), 3.0), ("b".into(), 2.0), ("c".into(), 1.0)],
            [
                ("a".into(), "b".into(), 1.0),
                ("c".into(), "a".into(), 1.0),
                ("b".into(), "c".into(), 0.5),
            ],
        )
    }

    #[test]
    fn top_subgraph_is_induced() {
        let g = abc();
        let top = g.top_subgraph(2);
        assert_eq!(top.node_names(), BTreeSet::from(["a", "b"]));
        assert_eq!(top.edge_count(), 1);
        assert_eq!(top.edge_weight("b", "a"), Some(1.0));
        assert_eq!(top.edge_weight("a", "c"), None);
    }

    #[test]
    fn top_subgraph_larger_than_graph() {
        let g = abc();
        assert_eq!(g.top_subgraph(10), g);
    }

    #[test]
    fn ties_break_by_name() {
        let g = GraphView::from_parts(
            [("z".into(), 1.0), ("y".into(), 1.0), ("x".into(), 2.0)],
            [],
        );
        assert_eq!(g.strongest(2), vec!["x", "y"]);
    }
}
