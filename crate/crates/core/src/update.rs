//! Differential updates of the visualized graph and their JSON encoding.
//!
//! Every frame the strongest buffered nodes are selected, compared with what
//! the consumer already has, and the difference is written as newline
//! delimited JSON using the graph streaming event keys `an`, `cn`, `dn`,
//! `ae`, `ce` and `de`. A frame always ends with a label line (`lb`) carrying
//! the data time, which also marks the frame boundary for readers.

use std::fmt::Write as _;

use chrono::DateTime;
use serde_json::Value;

use crate::buffer::{BufferedGraph, FilterParams};
use crate::error::{Error, Result};
use crate::graph::{edge_key, GraphView};
use crate::ingest::{expand_clique, InteractionEvent, PairInteraction};

/// Top-level keys a serialized update line may carry.
pub const EVENT_KEYS: [&str; 7] = ["an", "cn", "dn", "ae", "ce", "de", "lb"];

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateEvent {
    AddNode { name: String, strength: f64 },
    ChangeNode { name: String, strength: f64 },
    DeleteNode { name: String },
    AddEdge { a: String, b: String, weight: f64 },
    ChangeEdge { a: String, b: String, weight: f64 },
    DeleteEdge { a: String, b: String },
    Label { text: String },
}

impl UpdateEvent {
    pub fn key(&self) -> &'static str {
        match self {
            UpdateEvent::AddNode { .. } => "an",
            UpdateEvent::ChangeNode { .. } => "cn",
            UpdateEvent::DeleteNode { .. } => "dn",
            UpdateEvent::AddEdge { .. } => "ae",
            UpdateEvent::ChangeEdge { .. } => "ce",
            UpdateEvent::DeleteEdge { .. } => "de",
            UpdateEvent::Label { .. } => "lb",
        }
    }
}

/// Events turning one visualized graph into the next.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffUpdate {
    pub frame_time: i64,
    pub events: Vec<UpdateEvent>,
}

impl DiffUpdate {
    pub fn is_structurally_empty(&self) -> bool {
        self.events
            .iter()
            .all(|e| matches!(e, UpdateEvent::Label { .. }))
    }
}

/// The `visual_capacity` strongest nodes and the edges among them heavier
/// than `edge_threshold`.
pub fn select_visualized(view: &GraphView, params: &FilterParams) -> GraphView {
    view.top_subgraph(params.visual_capacity)
        .with_edges_above(params.edge_threshold)
}

fn changed(old: f64, new: f64, rel_tol: f64) -> bool {
    (new - old).abs() > rel_tol * old.abs()
}

/// Computes the update from `prev` to `next`.
///
/// Strength or weight changes within `rel_tol` (relative to the old value)
/// produce no event. Ordering: edge deletions, node deletions, node
/// additions, node changes, edge additions, edge changes, each sorted by key.
pub fn diff(prev: &GraphView, next: &GraphView, rel_tol: f64) -> DiffUpdate {
    let mut events = Vec::new();
    for (a, b, _) in prev.edges() {
        if next.edge_weight(a, b).is_none() {
            events.push(UpdateEvent::DeleteEdge {
                a: a.to_string(),
                b: b.to_string(),
            });
        }
    }
    for (n, _) in prev.nodes() {
        if !next.contains_node(n) {
            events.push(UpdateEvent::DeleteNode {
                name: n.to_string(),
            });
        }
    }
    for (n, s) in next.nodes() {
        if !prev.contains_node(n) {
            events.push(UpdateEvent::AddNode {
                name: n.to_string(),
                strength: s,
            });
        }
    }
    for (n, s) in next.nodes() {
        if let Some(old) = prev.strength(n) {
            if changed(old, s, rel_tol) {
                events.push(UpdateEvent::ChangeNode {
                    name: n.to_string(),
                    strength: s,
                });
            }
        }
    }
    for (a, b, w) in next.edges() {
        if prev.edge_weight(a, b).is_none() {
            events.push(UpdateEvent::AddEdge {
                a: a.to_string(),
                b: b.to_string(),
                weight: w,
            });
        }
    }
    for (a, b, w) in next.edges() {
        if let Some(old) = prev.edge_weight(a, b) {
            if changed(old, w, rel_tol) {
                events.push(UpdateEvent::ChangeEdge {
                    a: a.to_string(),
                    b: b.to_string(),
                    weight: w,
                });
            }
        }
    }
    DiffUpdate {
        frame_time: 0,
        events,
    }
}

/// Applies `events` to `graph`, rejecting references to missing elements.
pub fn apply_events(graph: &mut GraphView, events: &[UpdateEvent]) -> Result<(), String> {
    for e in events {
        match e {
            UpdateEvent::AddNode { name, strength } => {
                if graph.contains_node(name) {
                    return Err(format!("node {name:?} already present"));
                }
                graph.set_node(name, *strength);
            }
            UpdateEvent::ChangeNode { name, strength } => {
                if !graph.contains_node(name) {
                    return Err(format!("change of missing node {name:?}"));
                }
                graph.set_node(name, *strength);
            }
            UpdateEvent::DeleteNode { name } => {
                if graph.remove_node(name).is_none() {
                    return Err(format!("delete of missing node {name:?}"));
                }
                if graph.has_incident_edge(name) {
                    return Err(format!("node {name:?} deleted before its edges"));
                }
            }
            UpdateEvent::AddEdge { a, b, weight } => {
                if !graph.contains_node(a) || !graph.contains_node(b) {
                    return Err(format!("edge {a:?}-{b:?} references a missing node"));
                }
                if graph.edge_weight(a, b).is_some() {
                    return Err(format!("edge {a:?}-{b:?} already present"));
                }
                graph.set_edge(a, b, *weight);
            }
            UpdateEvent::ChangeEdge { a, b, weight } => {
                if graph.edge_weight(a, b).is_none() {
                    return Err(format!("change of missing edge {a:?}-{b:?}"));
                }
                graph.set_edge(a, b, *weight);
            }
            UpdateEvent::DeleteEdge { a, b } => {
                if graph.remove_edge(a, b).is_none() {
                    return Err(format!("delete of missing edge {a:?}-{b:?}"));
                }
            }
            UpdateEvent::Label { .. } => {}
        }
    }
    Ok(())
}

/// Tracks what the consumer has been sent and produces updates against it.
///
/// Suppressed small changes leave the old value in the sent state, so the
/// next comparison is made against what the consumer actually shows and the
/// gap never exceeds `rel_tol`.
#[derive(Debug, Clone, Default)]
pub struct Differ {
    sent: GraphView,
    rel_tol: f64,
}

impl Differ {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            sent: GraphView::new(),
            rel_tol,
        }
    }

    /// The graph the consumer holds after all updates produced so far.
    pub fn sent(&self) -> &GraphView {
        &self.sent
    }

    pub fn update(&mut self, next: &GraphView, frame_time: i64) -> DiffUpdate {
        let mut u = diff(&self.sent, next, self.rel_tol);
        u.frame_time = frame_time;
        apply_events(&mut self.sent, &u.events).expect("diff output applies to its own base");
        u
    }
}

/// Fixed-point rendering with six decimals, as used for every number on the wire.
pub fn format_number(x: f64) -> String {
    format!("{x:.6}")
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn write_event_body(out: &mut String, e: &UpdateEvent) {
    let _ = match e {
        UpdateEvent::AddNode { name, strength } | UpdateEvent::ChangeNode { name, strength } => {
            write!(
                out,
                "{}:{{\"label\":{},\"size\":{}}}",
                json_string(name),
                json_string(name),
                format_number(*strength)
            )
        }
        UpdateEvent::DeleteNode { name } => write!(out, "{}:{{}}", json_string(name)),
        UpdateEvent::AddEdge { a, b, weight } | UpdateEvent::ChangeEdge { a, b, weight } => {
            write!(
                out,
                "{}:{{\"source\":{},\"target\":{},\"directed\":false,\"weight\":{}}}",
                json_string(&format!("{a}|{b}")),
                json_string(a),
                json_string(b),
                format_number(*weight)
            )
        }
        UpdateEvent::DeleteEdge { a, b } => {
            write!(out, "{}:{{}}", json_string(&format!("{a}|{b}")))
        }
        UpdateEvent::Label { text } => write!(out, "\"text\":{}", json_string(text)),
    };
}

/// Serializes an update as JSON lines, one line per run of same-kind events.
pub fn serialize_update(u: &DiffUpdate) -> Vec<String> {
    let mut lines = Vec::new();
    let mut i = 0;
    while i < u.events.len() {
        let key = u.events[i].key();
        let mut line = format!("{{\"{key}\":{{");
        let mut first = true;
        while i < u.events.len() && u.events[i].key() == key {
            if !first {
                line.push(',');
            }
            write_event_body(&mut line, &u.events[i]);
            first = false;
            i += 1;
            // label objects hold a single text each
            if key == "lb" {
                break;
            }
        }
        line.push_str("}}");
        lines.push(line);
    }
    lines
}

/// `YYYY-MM-DD HH:MM` in UTC.
pub fn format_label(epoch_seconds: i64) -> String {
    DateTime::from_timestamp(epoch_seconds, 0)
        .map(|d| d.format("%Y-%m-%d %H:%M").to_string())
        .unwrap_or_else(|| epoch_seconds.to_string())
}

/// Reference consumer of the JSON update stream.
#[derive(Debug, Clone, Default)]
pub struct UpdateApplier {
    graph: GraphView,
    caption: Option<String>,
    lines: usize,
    frames: usize,
}

impl UpdateApplier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn graph(&self) -> &GraphView {
        &self.graph
    }

    pub fn caption(&self) -> Option<&str> {
        self.caption.as_deref()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Applies one line; returns `true` when the line closes a frame.
    pub fn apply_line(&mut self, line: &str) -> Result<bool> {
        self.lines += 1;
        let line_no = self.lines;
        let fail = |reason: String| Error::Apply {
            line: line_no,
            reason,
        };
        let value: Value = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| fail("not a JSON object".into()))?;
        let mut frame_end = false;
        for (key, body) in obj {
            if !EVENT_KEYS.contains(&key.as_str()) {
                return Err(fail(format!("unknown event key {key:?}")));
            }
            let body = body
                .as_object()
                .ok_or_else(|| fail(format!("{key}: body is not an object")))?;
            let events = decode(key, body).map_err(fail)?;
            if key == "lb" {
                frame_end = true;
                if let Some(UpdateEvent::Label { text }) = events.last() {
                    self.caption = Some(text.clone());
                }
            }
            apply_events(&mut self.graph, &events).map_err(fail)?;
        }
        if frame_end {
            self.frames += 1;
        }
        Ok(frame_end)
    }
}

fn number(attrs: &serde_json::Map<String, Value>, field: &str) -> Result<f64, String> {
    attrs
        .get(field)
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("missing numeric {field:?}"))
}

fn text<'a>(attrs: &'a serde_json::Map<String, Value>, field: &str) -> Result<&'a str, String> {
    attrs
        .get(field)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string {field:?}"))
}

fn split_edge_id(id: &str, graph_hint: Option<(&str, &str)>) -> Result<(String, String), String> {
    if let Some((a, b)) = graph_hint {
        return Ok((a.to_string(), b.to_string()));
    }
    let (a, b) = id
        .split_once('|')
        .ok_or_else(|| format!("bad edge id {id:?}"))?;
    Ok((a.to_string(), b.to_string()))
}

fn decode(key: &str, body: &serde_json::Map<String, Value>) -> Result<Vec<UpdateEvent>, String> {
    if key == "lb" {
        return Ok(vec![UpdateEvent::Label {
            text: text(body, "text")?.to_string(),
        }]);
    }
    let mut out = Vec::with_capacity(body.len());
    for (id, attrs) in body {
        let attrs = attrs
            .as_object()
            .ok_or_else(|| format!("{key}.{id}: attributes are not an object"))?;
        let endpoints = match (attrs.get("source"), attrs.get("target")) {
            (Some(Value::String(s)), Some(Value::String(t))) => Some((s.as_str(), t.as_str())),
            _ => None,
        };
        let event = match key {
            "an" => UpdateEvent::AddNode {
                name: id.clone(),
                strength: number(attrs, "size")?,
            },
            "cn" => UpdateEvent::ChangeNode {
                name: id.clone(),
                strength: number(attrs, "size")?,
            },
            "dn" => UpdateEvent::DeleteNode { name: id.clone() },
            "ae" | "ce" => {
                let (a, b) = split_edge_id(id, endpoints)?;
                let (a, b) = edge_key(&a, &b);
                let weight = number(attrs, "weight")?;
                if key == "ae" {
                    UpdateEvent::AddEdge { a, b, weight }
                } else {
                    UpdateEvent::ChangeEdge { a, b, weight }
                }
            }
            "de" => {
                let (a, b) = split_edge_id(id, endpoints)?;
                let (a, b) = edge_key(&a, &b);
                UpdateEvent::DeleteEdge { a, b }
            }
            other => return Err(format!("unknown event key {other:?}")),
        };
        out.push(event);
    }
    Ok(out)
}

/// One emitted frame.
#[derive(Debug, Clone)]
pub struct Frame {
    /// Data time of the frame (whole seconds).
    pub time: i64,
    pub update: DiffUpdate,
    /// What [`select_visualized`] returned for this frame.
    pub visualized: GraphView,
    /// The whole buffer at frame time, when snapshot capture is enabled.
    pub buffered: Option<GraphView>,
}

/// Frame boundaries at `origin + k * interval`, `k >= 1`.
#[derive(Debug, Clone, Copy)]
pub struct FrameClock {
    origin: i64,
    interval: f64,
    next: u64,
}

impl FrameClock {
    pub fn new(origin: i64, interval: f64) -> Self {
        Self {
            origin,
            interval,
            next: 1,
        }
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    /// Next boundary not yet passed.
    pub fn peek(&self) -> f64 {
        self.origin as f64 + self.next as f64 * self.interval
    }

    /// Pops the next boundary if it lies at or before `t`.
    pub fn pop_due(&mut self, t: i64) -> Option<f64> {
        let b = self.peek();
        if b <= t as f64 {
            self.next += 1;
            Some(b)
        } else {
            None
        }
    }
}

/// Drives a [`BufferedGraph`] over an event stream and emits one update per
/// `time_contraction / frames_per_second` data seconds, plus a final update
/// at the time of the last event.
#[derive(Debug, Clone)]
pub struct UpdateScheduler {
    buffer: BufferedGraph,
    differ: Differ,
    clock: Option<FrameClock>,
    interval: f64,
    capture_buffer: bool,
    last_event_time: Option<i64>,
    updates: u64,
    pairs: u64,
}

impl UpdateScheduler {
    pub fn new(params: FilterParams, frames_per_second: u32, rel_tol: f64) -> Result<Self> {
        if frames_per_second == 0 {
            return Err(Error::InvalidParams("frames per second must be positive".into()));
        }
        if !(rel_tol >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "relative tolerance must be non-negative, got {rel_tol}"
            )));
        }
        let interval = params.time_contraction / f64::from(frames_per_second);
        Ok(Self {
            buffer: BufferedGraph::new(params)?,
            differ: Differ::new(rel_tol),
            clock: None,
            interval,
            capture_buffer: false,
            last_event_time: None,
            updates: 0,
            pairs: 0,
        })
    }

    /// Attach a full buffer snapshot to every frame.
    pub fn capture_buffer(mut self, on: bool) -> Self {
        self.capture_buffer = on;
        self
    }

    pub fn lenient_time(mut self) -> Self {
        self.buffer = self.buffer.lenient_time();
        self
    }

    pub fn buffer(&self) -> &BufferedGraph {
        &self.buffer
    }

    /// Data seconds between frames.
    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn updates_emitted(&self) -> u64 {
        self.updates
    }

    pub fn pairs_ingested(&self) -> u64 {
        self.pairs
    }

    pub fn push_event(&mut self, event: &InteractionEvent) -> Result<Vec<Frame>> {
        self.push_clique(event.timestamp, &expand_clique(event))
    }

    /// Emits frames for every boundary at or before `timestamp`, then ingests
    /// the pairs of one clique.
    pub fn push_clique(&mut self, timestamp: i64, pairs: &[PairInteraction]) -> Result<Vec<Frame>> {
        let clock = self.clock.get_or_insert_with(|| FrameClock::new(timestamp, self.interval));
        let mut due = Vec::new();
        while let Some(b) = clock.pop_due(timestamp) {
            due.push(b);
        }
        if self.buffer.last_forget_time().is_none() {
            self.buffer = self.buffer.clone().with_origin(timestamp);
        }
        let mut frames = Vec::with_capacity(due.len());
        for b in due {
            frames.push(self.emit(b.floor() as i64)?);
        }
        self.buffer.advance_time(timestamp)?;
        self.buffer.ingest_clique(pairs);
        self.pairs += pairs.len() as u64;
        self.last_event_time = Some(self.last_event_time.map_or(timestamp, |t| t.max(timestamp)));
        Ok(frames)
    }

    fn emit(&mut self, time: i64) -> Result<Frame> {
        self.buffer.advance_time(time)?;
        let snapshot = self.buffer.snapshot();
        let visualized = select_visualized(&snapshot, self.buffer.params());
        let mut update = self.differ.update(&visualized, time);
        update.events.push(UpdateEvent::Label {
            text: format_label(time),
        });
        self.updates += 1;
        Ok(Frame {
            time,
            update,
            visualized,
            buffered: self.capture_buffer.then_some(snapshot),
        })
    }

    /// Final frame at the time of the last event; `None` for an empty stream.
    pub fn finish(&mut self) -> Result<Option<Frame>> {
        match self.last_event_time {
            Some(t) => self.emit(t).map(Some),
            None => Ok(None),
        }
    }
}
