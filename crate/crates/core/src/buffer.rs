//! The fixed-capacity buffer of strongest nodes.
//!
//! At most `buffer_capacity` nodes are held together with a dense symmetric
//! weight matrix. A node not yet buffered always takes the slot of the weakest
//! buffered node. Every `forgetting_period` seconds of data time all weights
//! and strengths are multiplied by the forgetting factor, which makes the
//! buffer a stepwise approximation of an exponentially decaying time window.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphView;
use crate::ingest::{PairChecksum, PairInteraction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Maximum number of buffered nodes.
    pub buffer_capacity: usize,
    /// Number of strongest nodes shown per frame.
    pub visual_capacity: usize,
    /// Multiplier applied once per forgetting period, in `[0, 1)`.
    pub forgetting_factor: f64,
    /// Forgetting period in data seconds.
    pub forgetting_period: i64,
    /// Edges must be strictly heavier than this to be visualized.
    pub edge_threshold: f64,
    /// Data seconds contracted into one second of animation.
    pub time_contraction: f64,
    /// Weights and strengths below this are treated as zero.
    pub prune_epsilon: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            buffer_capacity: 2000,
            visual_capacity: 50,
            forgetting_factor: 0.8,
            forgetting_period: 120,
            edge_threshold: 0.95,
            time_contraction: 3600.0,
            prune_epsilon: 1e-12,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.buffer_capacity < 2 {
            return fail(format!(
                "buffer capacity must be at least 2, got {}",
                self.buffer_capacity
            ));
        }
        if self.visual_capacity == 0 || self.visual_capacity > self.buffer_capacity {
            return fail(format!(
                "visual capacity must be in 1..={}, got {}",
                self.buffer_capacity, self.visual_capacity
            ));
        }
        if !(0.0..1.0).contains(&self.forgetting_factor) {
            return fail(format!(
                "forgetting factor must be in [0, 1), got {}",
                self.forgetting_factor
            ));
        }
        if self.forgetting_period <= 0 {
            return fail(format!(
                "forgetting period must be positive, got {}",
                self.forgetting_period
            ));
        }
        if !(self.edge_threshold >= 0.0) {
            return fail(format!(
                "edge threshold must be non-negative, got {}",
                self.edge_threshold
            ));
        }
        if !(self.time_contraction > 0.0) || !self.time_contraction.is_finite() {
            return fail(format!(
                "time contraction must be positive, got {}",
                self.time_contraction
            ));
        }
        if !(self.prune_epsilon > 0.0) {
            return fail(format!(
                "prune epsilon must be positive, got {}",
                self.prune_epsilon
            ));
        }
        Ok(())
    }

    /// Rectangular window width with the same aggregating area as this filter.
    pub fn equivalent_window_width(&self) -> f64 {
        self.forgetting_period as f64 / (1.0 - self.forgetting_factor)
    }

    /// Continuous decay rate whose value at every forgetting boundary matches the filter.
    pub fn decay_rate(&self) -> f64 {
        -self.forgetting_factor.ln() / self.forgetting_period as f64
    }
}

/// Width of the rectangular window whose aggregating area equals that of a
/// filter forgetting by `forgetting_factor` every `forgetting_period` seconds.
pub fn equivalent_window_width(forgetting_factor: f64, forgetting_period: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&forgetting_factor) {
        return Err(Error::Domain(format!(
            "forgetting factor must be in [0, 1), got {forgetting_factor}"
        )));
    }
    if !(forgetting_period > 0.0) {
        return Err(Error::Domain(format!(
            "forgetting period must be positive, got {forgetting_period}"
        )));
    }
    Ok(forgetting_period / (1.0 - forgetting_factor))
}

/// Lower bound on how long a node of strength `node_strength` stays buffered
/// without further activity while the weakest buffered strength holds at
/// `weakest_strength`.
pub fn retention_bound(
    node_strength: f64,
    weakest_strength: f64,
    forgetting_factor: f64,
    forgetting_period: f64,
) -> Result<f64> {
    if !(weakest_strength > 0.0 && weakest_strength < node_strength) {
        return Err(Error::Domain(format!(
            "need 0 < weakest strength < node strength, got {weakest_strength} and {node_strength}"
        )));
    }
    if !(forgetting_factor > 0.0 && forgetting_factor < 1.0) {
        return Err(Error::Domain(format!(
            "forgetting factor must be in (0, 1), got {forgetting_factor}"
        )));
    }
    if !(forgetting_period > 0.0) {
        return Err(Error::Domain(format!(
            "forgetting period must be positive, got {forgetting_period}"
        )));
    }
    Ok((weakest_strength / node_strength).ln() / forgetting_factor.ln() * forgetting_period)
}

/// Strongest-node buffer with a dense `capacity x capacity` weight matrix.
#[derive(Debug, Clone)]
pub struct BufferedGraph {
    params: FilterParams,
    capacity: usize,
    slots: HashMap<String, usize>,
    names: Vec<Option<String>>,
    strengths: Vec<f64>,
    weights: Vec<f64>,
    last_update: Vec<i64>,
    free: Vec<usize>,
    last_forget_time: Option<i64>,
    strict_time: bool,
    evictions: u64,
    consumed: PairChecksum,
}

impl BufferedGraph {
    pub fn new(params: FilterParams) -> Result<Self> {
        params.validate()?;
        let capacity = params.buffer_capacity;
        Ok(Self {
            capacity,
            slots: HashMap::with_capacity(capacity),
            names: vec![None; capacity],
            strengths: vec![0.0; capacity],
            weights: vec![0.0; capacity * capacity],
            last_update: vec![0; capacity],
            free: (0..capacity).rev().collect(),
            last_forget_time: None,
            strict_time: true,
            evictions: 0,
            consumed: PairChecksum::default(),
            params,
        })
    }

    /// Anchors the forgetting schedule: boundaries fall at `origin + k * forgetting_period`.
    /// Without it the first `advance_time` call sets the origin.
    pub fn with_origin(mut self, origin: i64) -> Self {
        self.last_forget_time = Some(origin);
        self
    }

    /// Ignore (instead of rejecting) requests to move time backwards.
    pub fn lenient_time(mut self) -> Self {
        self.strict_time = false;
        self
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.slots.contains_key(name)
    }

    pub fn strength(&self, name: &str) -> Option<f64> {
        self.slots.get(name).map(|&s| self.strengths[s])
    }

    pub fn weight(&self, a: &str, b: &str) -> f64 {
        match (self.slots.get(a), self.slots.get(b)) {
            (Some(&i), Some(&j)) => self.weights[i * self.capacity + j],
            _ => 0.0,
        }
    }

    pub fn last_forget_time(&self) -> Option<i64> {
        self.last_forget_time
    }

    /// Total number of nodes evicted to make room for newcomers.
    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn consumed(&self) -> PairChecksum {
        self.consumed
    }

    fn occupied(&self) -> Vec<usize> {
        (0..self.capacity)
            .filter(|&s| self.names[s].is_some())
            .collect()
    }

    fn weakest_slot(&self, protected: &[&str]) -> Option<usize> {
        let skip: Vec<usize> = protected
            .iter()
            .filter_map(|n| self.slots.get(*n).copied())
            .collect();
        let mut best: Option<usize> = None;
        let (mut best_s, mut best_t) = (f64::INFINITY, i64::MAX);
        for slot in 0..self.capacity {
            let s = self.strengths[slot];
            if s > best_s || self.names[slot].is_none() || skip.contains(&slot) {
                continue;
            }
            let t = self.last_update[slot];
            let better = match best {
                None => true,
                Some(b) => {
                    s < best_s
                        || (s == best_s
                            && (t < best_t || (t == best_t && self.names[slot] < self.names[b])))
                }
            };
            if better {
                best = Some(slot);
                best_s = s;
                best_t = t;
            }
        }
        best
    }

    /// The buffered node with the lowest strength. Ties go to the least
    /// recently updated node, then to the smallest name.
    pub fn weakest_node(&self) -> Option<&str> {
        self.weakest_slot(&[])
            .and_then(|s| self.names[s].as_deref())
    }

    /// Clears a slot, removing its edge weights from its neighbors' strengths.
    fn release(&mut self, slot: usize) -> String {
        let n = self.capacity;
        for j in 0..n {
            let w = self.weights[slot * n + j];
            if w != 0.0 {
                self.strengths[j] -= w;
                if self.strengths[j] < 0.0 {
                    self.strengths[j] = 0.0;
                }
                self.weights[slot * n + j] = 0.0;
                self.weights[j * n + slot] = 0.0;
            }
        }
        self.strengths[slot] = 0.0;
        let name = self.names[slot].take().expect("released slot is occupied");
        self.slots.remove(&name);
        self.free.push(slot);
        name
    }

    /// Returns the slot of `name`, inserting it (and evicting the weakest
    /// unprotected node if the buffer is full) when absent.
    fn ensure_slot(
        &mut self,
        name: &str,
        timestamp: i64,
        protected: &[&str],
        evicted: &mut Vec<String>,
    ) -> usize {
        if let Some(&slot) = self.slots.get(name) {
            return slot;
        }
        if self.free.is_empty() {
            let victim = self
                .weakest_slot(protected)
                .expect("buffer capacity exceeds protected set");
            let gone = self.release(victim);
            log::trace!("evicting {gone:?} for {name:?} at t={timestamp}");
            self.evictions += 1;
            evicted.push(gone);
        }
        let slot = self.free.pop().expect("free slot available");
        self.names[slot] = Some(name.to_string());
        self.strengths[slot] = 0.0;
        self.last_update[slot] = timestamp;
        self.slots.insert(name.to_string(), slot);
        slot
    }

    fn add_weight(&mut self, i: usize, j: usize, p: &PairInteraction) {
        let n = self.capacity;
        self.weights[i * n + j] += p.weight;
        self.weights[j * n + i] += p.weight;
        self.strengths[i] += p.weight;
        self.strengths[j] += p.weight;
        self.last_update[i] = p.timestamp;
        self.last_update[j] = p.timestamp;
        self.consumed.update(p);
    }

    /// Adds one pairwise interaction, returning the names of evicted nodes.
    ///
    /// Forgetting due at `p.timestamp` must already have been applied with
    /// [`advance_time`](Self::advance_time).
    pub fn ingest_pair(&mut self, p: &PairInteraction) -> Vec<String> {
        let mut evicted = Vec::new();
        let protect = [p.node_a.as_str(), p.node_b.as_str()];
        let i = self.ensure_slot(&p.node_a, p.timestamp, &protect, &mut evicted);
        let j = self.ensure_slot(&p.node_b, p.timestamp, &protect, &mut evicted);
        self.add_weight(i, j, p);
        evicted
    }

    /// Adds the pairs of one clique interaction.
    ///
    /// All members are placed in the buffer before any weight is added, so
    /// a clique bringing `j` newcomers evicts the `j` weakest non-members and
    /// never one of its own members. Cliques larger than the buffer fall back
    /// to pair-by-pair ingestion.
    pub fn ingest_clique(&mut self, pairs: &[PairInteraction]) -> Vec<String> {
        let mut members: Vec<&str> = Vec::new();
        for p in pairs {
            for n in [p.node_a.as_str(), p.node_b.as_str()] {
                if !members.contains(&n) {
                    members.push(n);
                }
            }
        }
        if members.len() > self.capacity {
            return pairs.iter().flat_map(|p| self.ingest_pair(p)).collect();
        }
        let mut evicted = Vec::new();
        let timestamp = pairs.first().map_or(0, |p| p.timestamp);
        for m in &members {
            self.ensure_slot(m, timestamp, &members, &mut evicted);
        }
        for p in pairs {
            let i = self.slots[&p.node_a];
            let j = self.slots[&p.node_b];
            self.add_weight(i, j, p);
        }
        evicted
    }

    /// Applies every forgetting round due at or before `t` and returns how many ran.
    pub fn advance_time(&mut self, t: i64) -> Result<u64> {
        let Some(last) = self.last_forget_time else {
            self.last_forget_time = Some(t);
            return Ok(0);
        };
        if t < last {
            if self.strict_time {
                return Err(Error::TimeRegression {
                    requested: t as f64,
                    current: last as f64,
                });
            }
            return Ok(0);
        }
        let period = self.params.forgetting_period;
        let rounds = ((t - last) / period) as u64;
        if rounds == 0 {
            return Ok(0);
        }
        self.forget(rounds);
        self.last_forget_time = Some(last + rounds as i64 * period);
        Ok(rounds)
    }

    fn forget(&mut self, rounds: u64) {
        let cf = self.params.forgetting_factor;
        let factor = if rounds <= 64 {
            (0..rounds).fold(1.0, |acc, _| acc * cf)
        } else {
            cf.powf(rounds as f64)
        };
        let eps = self.params.prune_epsilon;
        let n = self.capacity;
        let occupied = self.occupied();
        for &i in &occupied {
            self.strengths[i] = 0.0;
        }
        for (idx, &i) in occupied.iter().enumerate() {
            for &j in &occupied[idx + 1..] {
                let w = self.weights[i * n + j];
                if w == 0.0 {
                    continue;
                }
                let mut scaled = w * factor;
                if scaled < eps {
                    scaled = 0.0;
                }
                self.weights[i * n + j] = scaled;
                self.weights[j * n + i] = scaled;
                self.strengths[i] += scaled;
                self.strengths[j] += scaled;
            }
        }
        for &i in &occupied {
            if self.strengths[i] < eps {
                self.release(i);
            }
        }
    }

    /// Deep copy of the buffered graph: nodes with their strengths and every
    /// positive-weight edge once.
    pub fn snapshot(&self) -> GraphView {
        let n = self.capacity;
        let occupied = self.occupied();
        let nodes = occupied
            .iter()
            .map(|&s| (self.names[s].clone().unwrap(), self.strengths[s]));
        let mut edges = Vec::new();
        for (idx, &i) in occupied.iter().enumerate() {
            for &j in &occupied[idx + 1..] {
                let w = self.weights[i * n + j];
                if w > 0.0 {
                    edges.push((
                        self.names[i].clone().unwrap(),
                        self.names[j].clone().unwrap(),
                        w,
                    ));
                }
            }
        }
        GraphView::from_parts(nodes, edges)
    }

    /// Largest `|S_i - sum_j w_ij|` over buffered nodes, plus a check of the
    /// matrix invariants (symmetry, zero diagonal, no weight on empty slots).
    pub fn consistency_error(&self) -> f64 {
        let n = self.capacity;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.weights[i * n + j]).sum();
            if self.names[i].is_none() {
                if row != 0.0 || self.strengths[i] != 0.0 {
                    return f64::INFINITY;
                }
                continue;
            }
            if self.weights[i * n + i] != 0.0 {
                return f64::INFINITY;
            }
            for j in 0..n {
                if self.weights[i * n + j] != self.weights[j * n + i] {
                    return f64::INFINITY;
                }
            }
            worst = worst.max((self.strengths[i] - row).abs());
        }
        worst
    }
}
