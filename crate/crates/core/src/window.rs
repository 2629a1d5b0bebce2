//! Sliding time-window baselines.
//!
//! Both windows keep every node they have seen while it carries weight, so
//! their memory grows with the activity inside the window.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{edge_key, EdgeKey, GraphView};
use crate::ingest::{PairChecksum, PairInteraction};

/// Exponents above this trigger renormalization of the stored values.
const MAX_LOG_SCALE: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowKind {
    /// Every event younger than `width` seconds counts with its full weight.
    Rectangular { width: f64 },
    /// An event aged `dt` counts with `exp(-decay_rate * dt)` of its weight.
    Exponential { decay_rate: f64 },
}

/// Area under the aggregating curve of the stepwise forgetting filter.
pub fn stepwise_area(forgetting_factor: f64, forgetting_period: f64) -> f64 {
    forgetting_period / (1.0 - forgetting_factor)
}

/// Area under the aggregating curve of a rectangular window.
pub fn rectangular_area(width: f64) -> f64 {
    width
}

/// Area under the aggregating curve of a continuous exponential window.
pub fn exponential_area(decay_rate: f64) -> f64 {
    1.0 / decay_rate
}

#[derive(Debug, Clone, Copy, Default)]
struct Aggregate {
    value: f64,
    /// Live contributing events; rectangular windows drop the entry exactly at zero.
    live: u64,
}

/// Unbounded weighted graph maintained by a sliding time window.
#[derive(Debug, Clone)]
pub struct WindowGraph {
    kind: WindowKind,
    prune_epsilon: f64,
    strict_time: bool,
    current_time: Option<f64>,
    log: VecDeque<PairInteraction>,
    strengths: HashMap<String, Aggregate>,
    edges: HashMap<EdgeKey, Aggregate>,
    /// Exponential only: stored values are actual values times `exp(decay_rate * (now - reference_time))`.
    reference_time: f64,
    consumed: PairChecksum,
}

impl WindowGraph {
    pub fn rectangular(width: f64, prune_epsilon: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidParams(format!(
                "window width must be positive and finite, got {width}"
            )));
        }
        Ok(Self::with_kind(WindowKind::Rectangular { width }, prune_epsilon))
    }

    pub fn exponential(decay_rate: f64, prune_epsilon: f64) -> Result<Self> {
        if !(decay_rate > 0.0) || !decay_rate.is_finite() {
            return Err(Error::InvalidParams(format!(
                "decay rate must be positive and finite, got {decay_rate}"
            )));
        }
        Ok(Self::with_kind(
            WindowKind::Exponential { decay_rate },
            prune_epsilon,
        ))
    }

    fn with_kind(kind: WindowKind, prune_epsilon: f64) -> Self {
        Self {
            kind,
            prune_epsilon,
            strict_time: true,
            current_time: None,
            log: VecDeque::new(),
            strengths: HashMap::new(),
            edges: HashMap::new(),
            reference_time: 0.0,
            consumed: PairChecksum::default(),
        }
    }

    pub fn lenient_time(mut self) -> Self {
        self.strict_time = false;
        self
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn current_time(&self) -> Option<f64> {
        self.current_time
    }

    pub fn consumed(&self) -> PairChecksum {
        self.consumed
    }

    /// Number of nodes currently held, including ones that have decayed below
    /// the pruning threshold but not been dropped yet.
    pub fn stored_nodes(&self) -> usize {
        self.strengths.len()
    }

    /// Number of events retained by a rectangular window.
    pub fn logged_events(&self) -> usize {
        self.log.len()
    }

    fn advance(&mut self, t: f64) -> Result<()> {
        let now = match self.current_time {
            None => {
                self.reference_time = t;
                self.current_time = Some(t);
                t
            }
            Some(now) if t < now => {
                if self.strict_time {
                    return Err(Error::TimeRegression {
                        requested: t,
                        current: now,
                    });
                }
                now
            }
            Some(_) => {
                self.current_time = Some(t);
                t
            }
        };
        match self.kind {
            WindowKind::Rectangular { width } => self.expire(now, width),
            WindowKind::Exponential { decay_rate } => {
                if decay_rate * (now - self.reference_time) > MAX_LOG_SCALE {
                    self.renormalize(now, decay_rate);
                }
            }
        }
        Ok(())
    }

    fn expire(&mut self, now: f64, width: f64) {
        while let Some(front) = self.log.front() {
            if now - (front.timestamp as f64) < width {
                break;
            }
            let p = self.log.pop_front().unwrap();
            let key = (p.node_a.clone(), p.node_b.clone());
            Self::retract(&mut self.edges, key, p.weight);
            Self::retract(&mut self.strengths, p.node_a, p.weight);
            Self::retract(&mut self.strengths, p.node_b, p.weight);
        }
    }

    fn retract<K: std::hash::Hash + Eq>(map: &mut HashMap<K, Aggregate>, key: K, weight: f64) {
        if let Some(agg) = map.get_mut(&key) {
            agg.live -= 1;
            if agg.live == 0 {
                map.remove(&key);
            } else {
                agg.value -= weight;
            }
        }
    }

    /// Rescales stored values to `reference_time = now` and drops entries below the pruning threshold.
    fn renormalize(&mut self, now: f64, decay_rate: f64) {
        let scale = (-decay_rate * (now - self.reference_time)).exp();
        let eps = self.prune_epsilon;
        let mut dropped: Vec<(String, String, f64)> = Vec::new();
        self.edges.retain(|(a, b), agg| {
            agg.value *= scale;
            if agg.value < eps {
                dropped.push((a.clone(), b.clone(), agg.value));
                false
            } else {
                true
            }
        });
        for agg in self.strengths.values_mut() {
            agg.value *= scale;
        }
        for (a, b, w) in dropped {
            for n in [a, b] {
                if let Some(agg) = self.strengths.get_mut(&n) {
                    agg.value -= w;
                }
            }
        }
        self.strengths.retain(|_, agg| agg.value >= eps);
        self.reference_time = now;
    }

    /// Advances to `p.timestamp` and adds the interaction.
    pub fn ingest(&mut self, p: &PairInteraction) -> Result<()> {
        self.advance(p.timestamp as f64)?;
        let stored = match self.kind {
            WindowKind::Rectangular { .. } => {
                self.log.push_back(p.clone());
                p.weight
            }
            WindowKind::Exponential { decay_rate } => {
                // Out-of-order events in lenient mode are aged from their own timestamp.
                p.weight * (decay_rate * (p.timestamp as f64 - self.reference_time)).exp()
            }
        };
        for key in [&p.node_a, &p.node_b] {
            let agg = self.strengths.entry(key.clone()).or_default();
            agg.value += stored;
            agg.live += 1;
        }
        let agg = self
            .edges
            .entry((p.node_a.clone(), p.node_b.clone()))
            .or_default();
        agg.value += stored;
        agg.live += 1;
        self.consumed.update(p);
        Ok(())
    }

    fn scale_at(&self, t: f64) -> f64 {
        match self.kind {
            WindowKind::Rectangular { .. } => 1.0,
            WindowKind::Exponential { decay_rate } => {
                (-decay_rate * (t - self.reference_time)).exp()
            }
        }
    }

    /// Advances to `t` (expiry and decay only) and returns the full graph.
    /// Nodes and edges lighter than the pruning threshold are omitted.
    pub fn snapshot(&mut self, t: f64) -> Result<GraphView> {
        let t = match self.current_time {
            Some(now) if t < now => now,
            _ => t,
        };
        self.advance(t)?;
        let scale = self.scale_at(t);
        let eps = self.prune_epsilon;
        let nodes: Vec<(String, f64)> = self
            .strengths
            .iter()
            .map(|(n, agg)| (n.clone(), agg.value * scale))
            .filter(|(_, s)| *s >= eps)
            .collect();
        let edges: Vec<(String, String, f64)> = self
            .edges
            .iter()
            .map(|((a, b), agg)| (a.clone(), b.clone(), agg.value * scale))
            .filter(|(_, _, w)| *w >= eps)
            .collect();
        Ok(GraphView::from_parts(nodes, edges))
    }

    /// Weight of edge `a`-`b` at the current time.
    pub fn edge_weight(&self, a: &str, b: &str) -> f64 {
        let now = self.current_time.unwrap_or(self.reference_time);
        self.edges
            .get(&edge_key(a, b))
            .map_or(0.0, |agg| agg.value * self.scale_at(now))
    }

    /// Largest `|S_i - sum_j w_ij|` in stored units.
    pub fn consistency_error(&self) -> f64 {
        let mut sums: HashMap<&str, f64> = HashMap::new();
        for ((a, b), agg) in &self.edges {
            *sums.entry(a.as_str()).or_default() += agg.value;
            *sums.entry(b.as_str()).or_default() += agg.value;
        }
        let scale = self.scale_at(self.current_time.unwrap_or(self.reference_time));
        let mut worst: f64 = 0.0;
        for (n, agg) in &self.strengths {
            let sum = sums.get(n.as_str()).copied().unwrap_or(0.0);
            worst = worst.max((agg.value - sum).abs() * scale);
        }
        for n in sums.keys() {
            if !self.strengths.contains_key(*n) {
                return f64::INFINITY;
            }
        }
        worst
    }
}

/// Subgraph induced by the `n` strongest nodes of `view`.
pub fn top_subgraph(view: &GraphView, n: usize) -> GraphView {
    view.top_subgraph(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(t: i64, a: &str, b: &str, w: f64) -> PairInteraction {
        PairInteraction::new(t, a, b, w)
    }

    #[test]
    fn rectangular_expiry() {
        let mut g = WindowGraph::rectangular(10.0, 1e-12).unwrap();
        g.ingest(&pair(0, "a", "b", 1.0)).unwrap();
        g.ingest(&pair(5, "a", "b", 1.0)).unwrap();
        assert_eq!(g.edge_weight("a", "b"), 2.0);
        g.ingest(&pair(11, "c", "d", 1.0)).unwrap();
        assert_eq!(g.edge_weight("a", "b"), 1.0);
        assert_eq!(g.logged_events(), 2);
    }

    #[test]
    fn rectangular_boundary_is_expired() {
        let mut g = WindowGraph::rectangular(10.0, 1e-12).unwrap();
        g.ingest(&pair(0, "a", "b", 1.0)).unwrap();
        let v = g.snapshot(9.0).unwrap();
        assert_eq!(v.edge_weight("a", "b"), Some(1.0));
        let v = g.snapshot(10.0).unwrap();
        assert!(v.is_empty());
        assert_eq!(g.stored_nodes(), 0);
    }

    #[test]
    fn exponential_half_life() {
        let mut g = WindowGraph::exponential(2f64.ln() / 10.0, 1e-12).unwrap();
        g.ingest(&pair(0, "a", "b", 4.0)).unwrap();
        let v = g.snapshot(10.0).unwrap();
        assert!((v.edge_weight("a", "b").unwrap() - 2.0).abs() < 1e-12);
        assert!((v.strength("a").unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_simultaneous_events_sum() {
        let mut g = WindowGraph::exponential(0.3, 1e-12).unwrap();
        g.ingest(&pair(5, "a", "b", 1.5)).unwrap();
        g.ingest(&pair(5, "a", "b", 2.5)).unwrap();
        assert_eq!(g.edge_weight("a", "b"), 4.0);
    }

    #[test]
    fn exponential_fades_out() {
        let mut g = WindowGraph::exponential(0.1, 1e-12).unwrap();
        g.ingest(&pair(0, "a", "b", 1.0)).unwrap();
        assert!(g.snapshot(1e6).unwrap().is_empty());
    }

    #[test]
    fn snapshot_is_decoupled() {
        let mut g = WindowGraph::rectangular(10.0, 1e-12).unwrap();
        g.ingest(&pair(0, "a", "b", 1.0)).unwrap();
        let v = g.snapshot(0.0).unwrap();
        g.ingest(&pair(1, "a", "c", 1.0)).unwrap();
        assert_eq!(v.node_count(), 2);
        assert_eq!(v.strength("a"), Some(1.0));
    }

    #[test]
    fn time_regression_is_rejected() {
        let mut g = WindowGraph::rectangular(10.0, 1e-12).unwrap();
        g.ingest(&pair(5, "a", "b", 1.0)).unwrap();
        assert!(g.ingest(&pair(3, "a", "b", 1.0)).is_err());
        let mut g = g.lenient_time();
        g.ingest(&pair(3, "a", "b", 1.0)).unwrap();
        assert_eq!(g.edge_weight("a", "b"), 2.0);
    }

    #[test]
    fn bad_parameters() {
        assert!(WindowGraph::rectangular(0.0, 1e-12).is_err());
        assert!(WindowGraph::exponential(f64::INFINITY, 1e-12).is_err());
        assert!(WindowGraph::exponential(0.0, 1e-12).is_err());
    }

    #[test]
    fn aggregating_areas() {
        // Equal-area matching of the stepwise curve and the rectangle.
        assert!((stepwise_area(2.0 / 3.0, 1.0) - rectangular_area(3.0)).abs() < 1e-12);
        // The continuous exponential with the same per-period decay has a
        // smaller area: 1/(-ln C_f) instead of 1/(1 - C_f).
        let cf: f64 = 2.0 / 3.0;
        let ratio = exponential_area(-cf.ln()) / stepwise_area(cf, 1.0);
        assert!((ratio - (1.0 - cf) / -cf.ln()).abs() < 1e-12);
        assert!(ratio < 1.0);
    }

    #[test]
    fn renormalization_keeps_values() {
        let mut g = WindowGraph::exponential(1.0, 1e-300).unwrap();
        for t in 0..=2000 {
            g.ingest(&pair(t, "a", "b", 1.0)).unwrap();
        }
        assert!(g.reference_time > 0.0, "renormalization never ran");
        let got = g.snapshot(2000.0).unwrap().edge_weight("a", "b").unwrap();
        let direct: f64 = (0..=2000).map(|age| (-(age as f64)).exp()).sum();
        assert!((got - direct).abs() <= 1e-9 * direct, "{got} vs {direct}");
    }

    fn stream() -> impl Strategy<Value = Vec<(i64, u8, u8, f64)>> {
        prop::collection::vec((0i64..4, 0u8..10, 0u8..10, 0.0f64..3.0), 1..200)
    }

    fn to_pairs(raw: &[(i64, u8, u8, f64)], integral: bool) -> Vec<PairInteraction> {
        let mut t = 0;
        raw.iter()
            .filter(|(_, a, b, _)| a != b)
            .map(|&(dt, a, b, w)| {
                t += dt;
                let w = if integral { w.round() } else { w };
                pair(t, &format!("n{a}"), &format!("n{b}"), w)
            })
            .collect()
    }

    /// From-scratch rectangular aggregation over `(t - width, t]`, summed in
    /// chronological order.
    fn rectangular_oracle(pairs: &[PairInteraction], t: f64, width: f64) -> HashMap<EdgeKey, f64> {
        let mut out: HashMap<EdgeKey, f64> = HashMap::new();
        for p in pairs {
            let pt = p.timestamp as f64;
            if t - width < pt && pt <= t {
                *out.entry(edge_key(&p.node_a, &p.node_b)).or_default() += p.weight;
            }
        }
        out
    }

    proptest! {
        #[test]
        fn rectangular_matches_reconstruction(raw in stream(), width in 1u8..20, extra in 0i64..10) {
            // Integer weights keep incremental add/subtract exact.
            let pairs = to_pairs(&raw, true);
            let mut g = WindowGraph::rectangular(f64::from(width), 1e-12).unwrap();
            for p in &pairs {
                g.ingest(p).unwrap();
            }
            let t = pairs.last().map_or(0, |p| p.timestamp) + extra;
            let view = g.snapshot(t as f64).unwrap();
            let oracle = rectangular_oracle(&pairs, t as f64, f64::from(width));
            let expected: HashMap<EdgeKey, f64> = oracle.into_iter().filter(|(_, w)| *w > 0.0).collect();
            let got: HashMap<EdgeKey, f64> = view.edges().filter(|e| e.2 > 0.0).map(|(a, b, w)| (edge_key(a, b), w)).collect();
            prop_assert_eq!(got, expected);
            prop_assert!(g.consistency_error() <= 1e-9);
        }

        #[test]
        fn rectangular_close_for_real_weights(raw in stream(), width in 1u8..20) {
            let pairs = to_pairs(&raw, false);
            let mut g = WindowGraph::rectangular(f64::from(width), 1e-12).unwrap();
            for p in &pairs {
                g.ingest(p).unwrap();
            }
            let t = pairs.last().map_or(0, |p| p.timestamp);
            let view = g.snapshot(t as f64).unwrap();
            for (k, w) in rectangular_oracle(&pairs, t as f64, f64::from(width)) {
                let got = view.edge_weight(&k.0, &k.1).unwrap_or(0.0);
                prop_assert!((got - w).abs() <= 1e-9 * w.max(1.0));
            }
            prop_assert!(g.consistency_error() <= 1e-9);
        }

        #[test]
        fn exponential_matches_direct_sum(raw in stream(), rate in 0.01f64..2.0, extra in 0i64..5) {
            let pairs = to_pairs(&raw, false);
            let mut g = WindowGraph::exponential(rate, 1e-300).unwrap();
            for p in &pairs {
                g.ingest(p).unwrap();
            }
            let t = (pairs.last().map_or(0, |p| p.timestamp) + extra) as f64;
            let view = g.snapshot(t).unwrap();
            let mut direct: HashMap<EdgeKey, f64> = HashMap::new();
            for p in &pairs {
                *direct.entry(edge_key(&p.node_a, &p.node_b)).or_default() +=
                    p.weight * (-rate * (t - p.timestamp as f64)).exp();
            }
            for (k, w) in direct {
                if w < 1e-300 { continue; }
                let got = view.edge_weight(&k.0, &k.1).unwrap_or(0.0);
                prop_assert!((got - w).abs() <= 1e-9 * w, "{} vs {}", got, w);
            }
            prop_assert!(g.consistency_error() <= 1e-9);
        }
    }
}
