//! Reading the interaction stream.
//!
//! Each input line is one clique interaction `<timestamp> <node> <node> [<node>...] <weight>`.
//! A clique of `m` distinct nodes stands for `m(m-1)/2` pairwise interactions, each carrying
//! the full weight of the event.

use std::fmt;
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, ParseError, Result};

/// One timestamped clique interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEvent {
    pub timestamp: i64,
    /// Distinct node names in first-occurrence order.
    pub nodes: Vec<String>,
    pub weight: f64,
}

impl InteractionEvent {
    /// Builds an event, dropping repeated node names.
    pub fn new<S: Into<String>>(
        timestamp: i64,
        nodes: impl IntoIterator<Item = S>,
        weight: f64,
    ) -> Result<Self, ParseError> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(ParseError::NegativeWeight(weight));
        }
        let mut distinct: Vec<String> = Vec::new();
        for n in nodes {
            let n = n.into();
            if !distinct.contains(&n) {
                distinct.push(n);
            }
        }
        if distinct.len() < 2 {
            return Err(ParseError::DegenerateClique);
        }
        Ok(Self {
            timestamp,
            nodes: distinct,
            weight,
        })
    }

    /// Number of pairwise interactions this clique expands to.
    pub fn pair_count(&self) -> usize {
        let m = self.nodes.len();
        m * (m - 1) / 2
    }
}

impl fmt::Display for InteractionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.timestamp)?;
        for n in &self.nodes {
            write!(f, " {n}")?;
        }
        write!(f, " {}", self.weight)
    }
}

/// A single undirected weighted interaction with `node_a < node_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInteraction {
    pub timestamp: i64,
    pub node_a: String,
    pub node_b: String,
    pub weight: f64,
}

impl PairInteraction {
    /// Canonicalizes the endpoint order. Panics if both endpoints are equal.
    pub fn new(timestamp: i64, a: impl Into<String>, b: impl Into<String>, weight: f64) -> Self {
        let (a, b) = (a.into(), b.into());
        assert_ne!(a, b, "self-interaction");
        let (node_a, node_b) = if a < b { (a, b) } else { (b, a) };
        Self {
            timestamp,
            node_a,
            node_b,
            weight,
        }
    }
}

/// Order-sensitive FNV-1a digest of a sequence of pair interactions.
///
/// Filters run side by side each keep one, so a harness can check they saw the same input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairChecksum {
    state: u64,
    count: u64,
}

impl Default for PairChecksum {
    fn default() -> Self {
        Self {
            state: 0xcbf2_9ce4_8422_2325,
            count: 0,
        }
    }
}

impl PairChecksum {
    fn feed(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.state ^= u64::from(*b);
            self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn update(&mut self, p: &PairInteraction) {
        self.feed(&p.timestamp.to_le_bytes());
        self.feed(p.node_a.as_bytes());
        self.feed(&[0]);
        self.feed(p.node_b.as_bytes());
        self.feed(&[0]);
        self.feed(&p.weight.to_bits().to_le_bytes());
        self.count += 1;
    }

    pub fn value(&self) -> u64 {
        self.state
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// Parses one non-comment input line.
pub fn parse_event(line: &str) -> Result<InteractionEvent, ParseError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 4 {
        return Err(ParseError::TooFewTokens(tokens.len()));
    }
    let timestamp: i64 = tokens[0]
        .parse()
        .map_err(|_| ParseError::BadTimestamp(tokens[0].to_string()))?;
    let last = tokens[tokens.len() - 1];
    let weight: f64 = last
        .parse()
        .map_err(|_| ParseError::BadWeight(last.to_string()))?;
    InteractionEvent::new(timestamp, tokens[1..tokens.len() - 1].iter().copied(), weight)
}

/// Inverse of [`parse_event`].
pub fn format_event(event: &InteractionEvent) -> String {
    event.to_string()
}

/// Expands a clique into its pairwise interactions, sorted by canonical pair key.
pub fn expand_clique(event: &InteractionEvent) -> Vec<PairInteraction> {
    let mut pairs = Vec::with_capacity(event.pair_count());
    for (i, a) in event.nodes.iter().enumerate() {
        for b in &event.nodes[i + 1..] {
            pairs.push(PairInteraction::new(
                event.timestamp,
                a.as_str(),
                b.as_str(),
                event.weight,
            ));
        }
    }
    pairs.sort_by(|x, y| (&x.node_a, &x.node_b).cmp(&(&y.node_a, &y.node_b)));
    pairs
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestCounters {
    pub lines_read: u64,
    pub events_accepted: u64,
    pub malformed: u64,
    pub out_of_order: u64,
    pub duplicates_dropped: u64,
}

/// How the reader reacts to malformed lines and timestamp regressions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Strictness {
    /// Malformed lines and out-of-order timestamps are fatal.
    #[default]
    Strict,
    /// Malformed lines are skipped, out-of-order events are passed through; both are counted.
    Lenient,
}

/// Iterator over the events of a line source.
///
/// After the first error in strict mode the iterator is exhausted.
pub struct EventStream<R> {
    reader: R,
    strictness: Strictness,
    counters: IngestCounters,
    line_no: usize,
    last_timestamp: Option<i64>,
    buf: String,
    failed: bool,
}

impl<R: BufRead> EventStream<R> {
    pub fn new(reader: R, strictness: Strictness) -> Self {
        Self {
            reader,
            strictness,
            counters: IngestCounters::default(),
            line_no: 0,
            last_timestamp: None,
            buf: String::new(),
            failed: false,
        }
    }

    pub fn counters(&self) -> IngestCounters {
        self.counters
    }

    fn next_event(&mut self) -> Result<Option<InteractionEvent>> {
        loop {
            self.buf.clear();
            if self.reader.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.counters.lines_read += 1;
            let event = match parse_event(line) {
                Ok(e) => e,
                Err(source) => {
                    if self.strictness == Strictness::Lenient {
                        self.counters.malformed += 1;
                        log::warn!("line {}: skipping malformed line: {source}", self.line_no);
                        continue;
                    }
                    return Err(Error::Parse {
                        line: self.line_no,
                        source,
                    });
                }
            };
            let tokens = line.split_whitespace().count();
            self.counters.duplicates_dropped += (tokens - 2 - event.nodes.len()) as u64;
            if let Some(prev) = self.last_timestamp {
                if event.timestamp < prev {
                    if self.strictness == Strictness::Strict {
                        return Err(Error::OutOfOrder {
                            line: self.line_no,
                            timestamp: event.timestamp,
                            previous: prev,
                        });
                    }
                    self.counters.out_of_order += 1;
                }
            }
            self.last_timestamp = Some(self.last_timestamp.map_or(event.timestamp, |p| p.max(event.timestamp)));
            self.counters.events_accepted += 1;
            return Ok(Some(event));
        }
    }
}

impl<R: BufRead> Iterator for EventStream<R> {
    type Item = Result<InteractionEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_event() {
            Ok(Some(e)) => Some(Ok(e)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Convenience wrapper: a stream over any reader.
pub fn stream_events<R: BufRead>(reader: R, strictness: Strictness) -> EventStream<R> {
    EventStream::new(reader, strictness)
}
