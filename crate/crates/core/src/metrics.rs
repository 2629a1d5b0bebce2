//! Structural metrics on the unweighted skeleton of a graph view.
//!
//! Every edge with positive weight counts as one undirected link. Metrics that
//! are not defined for a graph come back as `None`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::graph::GraphView;

/// How nodes of degree below two enter the average local clustering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LocalClustering {
    /// Average only over nodes with at least two neighbors.
    #[default]
    ExcludeLowDegree,
    /// Count nodes with fewer than two neighbors as zero.
    ZeroLowDegree,
}

/// Compact adjacency of the unweighted skeleton.
#[derive(Debug, Clone)]
pub struct Skeleton {
    /// Sorted neighbor lists, indexed like the view's nodes in name order.
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    /// Triangles through each node.
    corners: Vec<u64>,
}

impl Skeleton {
    pub fn new(view: &GraphView) -> Self {
        let index: HashMap<&str, usize> = view
            .nodes()
            .enumerate()
            .map(|(i, (n, _))| (n, i))
            .collect();
        let mut adjacency = vec![Vec::new(); index.len()];
        let mut edges = Vec::new();
        for (a, b, w) in view.edges() {
            if !(w > 0.0) {
                continue;
            }
            let (i, j) = (index[a], index[b]);
            adjacency[i].push(j);
            adjacency[j].push(i);
            edges.push((i.min(j), i.max(j)));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let corners = count_corners(&adjacency);
        Self {
            adjacency,
            edges,
            corners,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Number of triangles.
    pub fn triangles(&self) -> u64 {
        self.corners.iter().sum::<u64>() / 3
    }

    /// Number of paths of length two (connected triples), counted by center.
    pub fn connected_triples(&self) -> u64 {
        self.adjacency
            .iter()
            .map(|n| {
                let k = n.len() as u64;
                k * k.saturating_sub(1) / 2
            })
            .sum()
    }

    /// Number of edges among the neighbors of `i`.
    pub fn neighbor_links(&self, i: usize) -> u64 {
        self.corners[i]
    }

    /// Local clustering `2 e_i / (k_i (k_i - 1))`, undefined below degree two.
    pub fn local_clustering(&self, i: usize) -> Option<f64> {
        let k = self.degree(i) as u64;
        if k < 2 {
            return None;
        }
        Some(2.0 * self.neighbor_links(i) as f64 / (k * (k - 1)) as f64)
    }
}

/// Triangles through each node, listing every triangle once by walking
/// edges from lower to higher (degree, index) rank.
fn count_corners(adjacency: &[Vec<usize>]) -> Vec<u64> {
    let n = adjacency.len();
    let rank = |i: usize| (adjacency[i].len(), i);
    let forward: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            adjacency[u]
                .iter()
                .copied()
                .filter(|&v| rank(v) > rank(u))
                .collect()
        })
        .collect();
    let mut corners = vec![0u64; n];
    let mut mark = vec![false; n];
    for u in 0..n {
        for &v in &forward[u] {
            mark[v] = true;
        }
        for &v in &forward[u] {
            for &w in &forward[v] {
                if mark[w] {
                    corners[u] += 1;
                    corners[v] += 1;
                    corners[w] += 1;
                }
            }
        }
        for &v in &forward[u] {
            mark[v] = false;
        }
    }
    corners
}

/// Mean degree `2|E|/|V|`; undefined on an empty graph.
pub fn average_degree(view: &GraphView) -> Option<f64> {
    let s = Skeleton::new(view);
    average_degree_of(&s)
}

fn average_degree_of(s: &Skeleton) -> Option<f64> {
    if s.node_count() == 0 {
        return None;
    }
    Some(2.0 * s.edge_count() as f64 / s.node_count() as f64)
}

/// Transitivity `3 * triangles / connected triples`.
pub fn global_clustering(view: &GraphView) -> Option<f64> {
    global_clustering_of(&Skeleton::new(view))
}

fn global_clustering_of(s: &Skeleton) -> Option<f64> {
    let triples = s.connected_triples();
    if triples == 0 {
        return None;
    }
    Some(3.0 * s.triangles() as f64 / triples as f64)
}

pub fn avg_local_clustering(view: &GraphView, convention: LocalClustering) -> Option<f64> {
    avg_local_clustering_of(&Skeleton::new(view), convention)
}

fn avg_local_clustering_of(s: &Skeleton, convention: LocalClustering) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..s.node_count() {
        match (s.local_clustering(i), convention) {
            (Some(c), _) => {
                sum += c;
                count += 1;
            }
            (None, LocalClustering::ZeroLowDegree) => count += 1,
            (None, LocalClustering::ExcludeLowDegree) => {}
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Pearson correlation of the degrees at either end of an edge, taking each
/// edge in both orientations. Undefined for fewer than two edges or when all
/// edge endpoints have the same degree.
pub fn degree_assortativity(view: &GraphView) -> Option<f64> {
    degree_assortativity_of(&Skeleton::new(view))
}

fn degree_assortativity_of(s: &Skeleton) -> Option<f64> {
    if s.edge_count() < 2 {
        return None;
    }
    // Exact integer moments over the 2|E| orientations.
    let (mut sx, mut sxx, mut sxy) = (0i128, 0i128, 0i128);
    for &(i, j) in &s.edges {
        let (ki, kj) = (s.degree(i) as i128, s.degree(j) as i128);
        sx += ki + kj;
        sxx += ki * ki + kj * kj;
        sxy += 2 * ki * kj;
    }
    let m = 2 * s.edge_count() as i128;
    let var = m * sxx - sx * sx;
    if var == 0 {
        return None;
    }
    let cov = m * sxy - sx * sx;
    Some((cov as f64 / var as f64).clamp(-1.0, 1.0))
}

/// `|A ∩ B| / |A ∪ B|`, and 1 for two empty sets.
pub fn jaccard<'a>(
    a: impl IntoIterator<Item = &'a str>,
    b: impl IntoIterator<Item = &'a str>,
) -> f64 {
    let a: BTreeSet<&str> = a.into_iter().collect();
    let b: BTreeSet<&str> = b.into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// One sample of the structural metrics of a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub time: i64,
    pub node_count: usize,
    pub avg_degree: Option<f64>,
    pub global_clustering: Option<f64>,
    pub avg_local_clustering: Option<f64>,
    pub assortativity: Option<f64>,
}

impl MetricsRecord {
    pub fn measure(time: i64, view: &GraphView, convention: LocalClustering) -> Self {
        let s = Skeleton::new(view);
        Self {
            time,
            node_count: s.node_count(),
            avg_degree: average_degree_of(&s),
            global_clustering: global_clustering_of(&s),
            avg_local_clustering: avg_local_clustering_of(&s, convention),
            assortativity: degree_assortativity_of(&s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(edges: &[(&str, &str)]) -> GraphView {
        let mut names: Vec<String> = edges
            .iter()
            .flat_map(|(a, b)| [a.to_string(), b.to_string()])
            .collect();
        names.sort();
        names.dedup();
        GraphView::from_parts(
            names.into_iter().map(|n| (n, 1.0)),
            edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string(), 1.0)),
        )
    }

    fn triangle() -> GraphView {
        graph(&[("a", "b"), ("b", "c"), ("a", "c")])
    }

    fn star4() -> GraphView {
        graph(&[("h", "x"), ("h", "y"), ("h", "z")])
    }

    #[test]
    fn average_degrees() {
        assert_eq!(average_degree(&triangle()), Some(2.0));
        assert_eq!(average_degree(&star4()), Some(1.5));
        assert_eq!(average_degree(&graph(&[("a", "b")])), Some(1.0));
        assert_eq!(average_degree(&GraphView::new()), None);
    }

    #[test]
    fn global_clustering_cases() {
        assert_eq!(global_clustering(&triangle()), Some(1.0));
        assert_eq!(global_clustering(&star4()), Some(0.0));
        assert_eq!(global_clustering(&graph(&[("a", "b"), ("b", "c")])), Some(0.0));
        assert_eq!(global_clustering(&graph(&[("a", "b")])), None);
    }

    #[test]
    fn local_clustering_cases() {
        let ex = LocalClustering::ExcludeLowDegree;
        assert_eq!(avg_local_clustering(&triangle(), ex), Some(1.0));
        assert_eq!(avg_local_clustering(&star4(), ex), Some(0.0));
        let square = graph(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")]);
        assert_eq!(avg_local_clustering(&square, ex), Some(0.0));
        assert_eq!(avg_local_clustering(&graph(&[("a", "b")]), ex), None);
        // triangle with a pendant: c has degree 3 and c_c = 1/3
        let tailed = graph(&[("a", "b"), ("b", "c"), ("a", "c"), ("c", "d")]);
        let expected = (1.0 + 1.0 + 1.0 / 3.0) / 3.0;
        assert!((avg_local_clustering(&tailed, ex).unwrap() - expected).abs() < 1e-15);
        let zero = LocalClustering::ZeroLowDegree;
        let expected = (1.0 + 1.0 + 1.0 / 3.0) / 4.0;
        assert!((avg_local_clustering(&tailed, zero).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn assortativity_cases() {
        assert_eq!(degree_assortativity(&star4()), Some(-1.0));
        let k4 = graph(&[("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")]);
        assert_eq!(degree_assortativity(&k4), None);
        assert_eq!(degree_assortativity(&graph(&[("a", "b"), ("c", "d")])), None);
        assert_eq!(degree_assortativity(&graph(&[("a", "b")])), None);
    }

    #[test]
    fn jaccard_cases() {
        assert_eq!(jaccard(["a", "b"], ["b", "a"]), 1.0);
        assert_eq!(jaccard(["a"], ["b"]), 0.0);
        assert_eq!(jaccard(["a", "b", "c"], ["b", "c", "d"]), 0.5);
        assert_eq!(jaccard([], []), 1.0);
    }

    #[test]
    fn zero_weight_edges_are_not_links() {
        let g = GraphView::from_parts(
            [("a".into(), 0.0), ("b".into(), 0.0)],
            [("a".into(), "b".into(), 0.0)],
        );
        assert_eq!(average_degree(&g), Some(0.0));
    }

    fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..12).prop_flat_map(|n| {
            (Just(n), prop::collection::vec((0..n, 0..n), 0..30))
        })
    }

    fn build(n: usize, edges: &[(usize, usize)], label: impl Fn(usize) -> String, w: f64) -> GraphView {
        GraphView::from_parts(
            (0..n).map(|i| (label(i), 1.0)),
            edges
                .iter()
                .filter(|(a, b)| a != b)
                .map(|&(a, b)| (label(a), label(b), w)),
        )
    }

    proptest! {
        #[test]
        fn invariant_under_relabeling_and_scaling((n, edges) in random_graph(), shift in 1usize..50, scale in 0.001f64..1000.0) {
            let g = build(n, &edges, |i| format!("n{i:03}"), 1.0);
            // a relabeling that reverses the name order
            let h = build(n, &edges, |i| format!("m{:03}", 999 - (i + shift) % 1000), scale);
            let (x, y) = (MetricsRecord::measure(0, &g, LocalClustering::ExcludeLowDegree),
                          MetricsRecord::measure(0, &h, LocalClustering::ExcludeLowDegree));
            prop_assert_eq!(x.node_count, y.node_count);
            prop_assert_eq!(x.avg_degree, y.avg_degree);
            prop_assert_eq!(x.global_clustering, y.global_clustering);
            prop_assert_eq!(x.assortativity, y.assortativity);
            match (x.avg_local_clustering, y.avg_local_clustering) {
                (Some(p), Some(q)) => prop_assert!((p - q).abs() < 1e-12),
                (p, q) => prop_assert_eq!(p, q),
            }
        }

        #[test]
        fn bounded_ranges((n, edges) in random_graph()) {
            let g = build(n, &edges, |i| format!("n{i}"), 1.0);
            let r = MetricsRecord::measure(0, &g, LocalClustering::ZeroLowDegree);
            if let Some(c) = r.global_clustering { prop_assert!((0.0..=1.0).contains(&c)); }
            if let Some(c) = r.avg_local_clustering { prop_assert!((0.0..=1.0).contains(&c)); }
            if let Some(a) = r.assortativity { prop_assert!((-1.0..=1.0).contains(&a)); }
        }
    }
}
