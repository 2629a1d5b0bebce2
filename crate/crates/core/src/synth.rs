//! Synthetic bursty interaction streams.
//!
//! Events arrive as a Poisson process at whole-second resolution. Node
//! popularity follows a Zipf law over a fixed vocabulary; during a burst the
//! rate is multiplied and a fraction of the members is drawn from a
//! vocabulary private to that burst.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{format_event, InteractionEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Burst {
    pub start: u64,
    pub end: u64,
    pub rate_multiplier: f64,
    /// Probability that a member is drawn from the burst vocabulary.
    #[serde(default)]
    pub vocabulary_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Stream length in data seconds.
    pub duration: u64,
    /// Timestamp of the first second.
    #[serde(default)]
    pub start_time: i64,
    /// Mean events per second outside bursts.
    pub base_rate: f64,
    #[serde(default)]
    pub bursts: Vec<Burst>,
    pub vocabulary_size: usize,
    #[serde(default = "default_zipf")]
    pub zipf_exponent: f64,
    /// Inclusive range of clique sizes.
    #[serde(default = "default_clique")]
    pub clique_size: (usize, usize),
    /// Inclusive range of event weights; equal bounds give a constant weight.
    #[serde(default = "default_weight")]
    pub weight: (f64, f64),
    #[serde(default)]
    pub seed: u64,
}

fn default_zipf() -> f64 {
    1.0
}

fn default_clique() -> (usize, usize) {
    (2, 2)
}

fn default_weight() -> (f64, f64) {
    (1.0, 1.0)
}

impl SynthSpec {
    /// A stream with no bursts.
    pub fn steady(duration: u64, base_rate: f64, vocabulary_size: usize, seed: u64) -> Self {
        Self {
            duration,
            start_time: 0,
            base_rate,
            bursts: Vec::new(),
            vocabulary_size,
            zipf_exponent: default_zipf(),
            clique_size: default_clique(),
            weight: default_weight(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParams(m));
        if !(self.base_rate > 0.0) || !self.base_rate.is_finite() {
            return fail(format!("base rate must be positive, got {}", self.base_rate));
        }
        let (lo, hi) = self.clique_size;
        if lo < 2 || hi < lo {
            return fail(format!("clique size range must satisfy 2 <= min <= max, got {lo}..={hi}"));
        }
        if self.vocabulary_size < hi {
            return fail(format!(
                "vocabulary of {} cannot fill cliques of {hi}",
                self.vocabulary_size
            ));
        }
        if !(self.zipf_exponent >= 0.0) {
            return fail(format!("zipf exponent must be non-negative, got {}", self.zipf_exponent));
        }
        let (wlo, whi) = self.weight;
        if !(wlo >= 0.0 && whi >= wlo && whi.is_finite()) {
            return fail(format!("weight range must satisfy 0 <= min <= max, got {wlo}..={whi}"));
        }
        for b in &self.bursts {
            if b.start >= b.end || b.end > self.duration {
                return fail(format!(
                    "burst [{}, {}) must lie within [0, {})",
                    b.start, b.end, self.duration
                ));
            }
            if !(b.rate_multiplier > 0.0) || !b.rate_multiplier.is_finite() {
                return fail(format!("burst rate multiplier must be positive, got {}", b.rate_multiplier));
            }
            if !(0.0..=1.0).contains(&b.vocabulary_shift) {
                return fail(format!(
                    "vocabulary shift must be in [0, 1], got {}",
                    b.vocabulary_shift
                ));
            }
        }
        Ok(())
    }

    /// Rate multiplier and burst index (for vocabulary) in effect at `second`.
    fn conditions(&self, second: u64) -> (f64, Option<(usize, f64)>) {
        let mut rate = self.base_rate;
        let mut shift: Option<(usize, f64)> = None;
        for (i, b) in self.bursts.iter().enumerate() {
            if (b.start..b.end).contains(&second) {
                rate *= b.rate_multiplier;
                if shift.is_none_or(|(_, s)| b.vocabulary_shift > s) {
                    shift = Some((i, b.vocabulary_shift));
                }
            }
        }
        (rate, shift)
    }
}

/// Realized event counts of a generated stream.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SynthSummary {
    pub events: u64,
    pub pairs: u64,
    pub base_seconds: u64,
    pub base_events: u64,
    pub burst_seconds: u64,
    pub burst_events: u64,
}

impl SynthSummary {
    pub fn base_rate(&self) -> f64 {
        self.base_events as f64 / self.base_seconds.max(1) as f64
    }

    pub fn burst_rate(&self) -> f64 {
        self.burst_events as f64 / self.burst_seconds.max(1) as f64
    }
}

pub fn base_node(rank: usize) -> String {
    format!("n{rank}")
}

pub fn burst_node(burst: usize, rank: usize) -> String {
    format!("b{burst}_{rank}")
}

/// Deterministic generator of synthetic events.
pub struct Generator {
    spec: SynthSpec,
    rng: ChaCha8Rng,
    popularity: Zipf<f64>,
}

impl Generator {
    pub fn new(spec: SynthSpec) -> Result<Self> {
        spec.validate()?;
        let popularity = Zipf::new(spec.vocabulary_size as f64, spec.zipf_exponent)
            .map_err(|e| Error::InvalidParams(format!("zipf: {e}")))?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            popularity,
            spec,
        })
    }

    fn member(&mut self, shift: Option<(usize, f64)>) -> String {
        let rank = self.popularity.sample(&mut self.rng) as usize - 1;
        match shift {
            Some((burst, p)) if self.rng.random::<f64>() < p => burst_node(burst, rank),
            _ => base_node(rank),
        }
    }

    /// Events of one data second.
    fn second(&mut self, second: u64) -> Vec<InteractionEvent> {
        let (rate, shift) = self.spec.conditions(second);
        let count = Poisson::new(rate)
            .map(|d| d.sample(&mut self.rng) as u64)
            .unwrap_or(0);
        let t = self.spec.start_time + second as i64;
        let mut out = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let (lo, hi) = self.spec.clique_size;
            let m = self.rng.random_range(lo..=hi);
            let mut members: Vec<String> = Vec::with_capacity(m);
            let mut attempts = 0;
            while members.len() < m && attempts < 64 * m {
                let n = self.member(shift);
                if !members.contains(&n) {
                    members.push(n);
                }
                attempts += 1;
            }
            // heavy-tailed popularity can make distinct draws rare; fill by rank
            let mut rank = 0;
            while members.len() < m {
                let n = base_node(rank);
                if !members.contains(&n) {
                    members.push(n);
                }
                rank += 1;
            }
            let (wlo, whi) = self.spec.weight;
            let w = if whi > wlo {
                self.rng.random_range(wlo..=whi)
            } else {
                wlo
            };
            out.push(InteractionEvent::new(t, members, w).expect("valid synthetic event"));
        }
        out
    }

    /// Generates the whole stream, calling `sink` for each event in order.
    pub fn run(mut self, mut sink: impl FnMut(&InteractionEvent) -> Result<()>) -> Result<SynthSummary> {
        let mut summary = SynthSummary::default();
        for s in 0..self.spec.duration {
            let in_burst = self.spec.conditions(s).1.is_some();
            let events = self.second(s);
            let n = events.len() as u64;
            if in_burst {
                summary.burst_seconds += 1;
                summary.burst_events += n;
            } else {
                summary.base_seconds += 1;
                summary.base_events += n;
            }
            for e in &events {
                summary.events += 1;
                summary.pairs += e.pair_count() as u64;
                sink(e)?;
            }
        }
        Ok(summary)
    }
}

/// Generates the whole stream into memory.
pub fn generate(spec: &SynthSpec) -> Result<Vec<InteractionEvent>> {
    let mut events = Vec::new();
    Generator::new(spec.clone())?.run(|e| {
        events.push(e.clone());
        Ok(())
    })?;
    Ok(events)
}

/// Writes the stream in the input text format.
pub fn write_stream<W: Write>(spec: &SynthSpec, out: &mut W) -> Result<SynthSummary> {
    Generator::new(spec.clone())?.run(|e| {
        writeln!(out, "{}", format_event(e))?;
        Ok(())
    })
}
