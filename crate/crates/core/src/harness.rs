//! Drivers behind the command-line tool.
//!
//! `run_filter` turns an event stream into JSON updates. `run_compare` feeds
//! the same pairs to the buffered filter and both sliding windows, and
//! samples structural metrics and node-set similarity at every frame.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::buffer::FilterParams;
use crate::error::{Error, Result};
use crate::graph::GraphView;
use crate::ingest::{expand_clique, stream_events, IngestCounters, InteractionEvent, Strictness};
use crate::metrics::{jaccard, LocalClustering, MetricsRecord};
use crate::update::{select_visualized, serialize_update, Frame, UpdateScheduler};
use crate::window::WindowGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(flatten)]
    pub params: FilterParams,
    pub frames_per_second: u32,
    /// Relative change below which node and edge changes are not sent.
    pub rel_tol: f64,
    pub lenient: bool,
    pub local_clustering: LocalClustering,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: FilterParams::default(),
            frames_per_second: 30,
            rel_tol: 1e-3,
            lenient: false,
            local_clustering: LocalClustering::default(),
        }
    }
}

impl RunConfig {
    pub fn strictness(&self) -> Strictness {
        if self.lenient {
            Strictness::Lenient
        } else {
            Strictness::Strict
        }
    }

    fn scheduler(&self) -> Result<UpdateScheduler> {
        let s = UpdateScheduler::new(self.params.clone(), self.frames_per_second, self.rel_tol)?;
        Ok(if self.lenient { s.lenient_time() } else { s })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FilterSummary {
    #[serde(flatten)]
    pub input: IngestCounters,
    pub pairs: u64,
    pub updates_emitted: u64,
    pub lines_written: u64,
    pub evictions: u64,
}

fn write_frame<W: Write>(out: &mut W, frame: &Frame) -> Result<u64> {
    let lines = serialize_update(&frame.update);
    for l in &lines {
        writeln!(out, "{l}")?;
    }
    Ok(lines.len() as u64)
}

/// Runs the buffered filter over `input` and writes the update stream to `out`.
pub fn run_filter<R: BufRead, W: Write>(input: R, out: &mut W, cfg: &RunConfig) -> Result<FilterSummary> {
    let mut scheduler = cfg.scheduler()?;
    let mut events = stream_events(input, cfg.strictness());
    let mut lines = 0;
    for event in events.by_ref() {
        for frame in scheduler.push_event(&event?)? {
            lines += write_frame(out, &frame)?;
        }
    }
    if let Some(frame) = scheduler.finish()? {
        lines += write_frame(out, &frame)?;
    }
    out.flush()?;
    Ok(FilterSummary {
        input: events.counters(),
        pairs: scheduler.pairs_ingested(),
        updates_emitted: scheduler.updates_emitted(),
        lines_written: lines,
        evictions: scheduler.buffer().evictions(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Fastviz,
    Rectangular,
    Exponential,
}

impl FilterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Fastviz => "fastviz",
            FilterKind::Rectangular => "rectangular",
            FilterKind::Exponential => "exponential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    /// The `buffer_capacity` strongest nodes.
    Buffered,
    /// What would be visualized: the `visual_capacity` strongest nodes.
    Visualized,
    /// Everything a window holds.
    Full,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Buffered => "buffered",
            Level::Visualized => "visualized",
            Level::Full => "full",
        }
    }
}

/// Measurements taken at one frame boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: i64,
    pub metrics: Vec<(FilterKind, Level, MetricsRecord)>,
    /// Similarity of the buffered filter's node set to each baseline's.
    pub jaccard: Vec<(FilterKind, Level, f64)>,
}

impl Sample {
    pub fn metric(&self, filter: FilterKind, level: Level) -> Option<&MetricsRecord> {
        self.metrics
            .iter()
            .find(|(f, l, _)| *f == filter && *l == level)
            .map(|(_, _, r)| r)
    }

    pub fn jaccard(&self, baseline: FilterKind, level: Level) -> Option<f64> {
        self.jaccard
            .iter()
            .find(|(f, l, _)| *f == baseline && *l == level)
            .map(|(_, _, j)| *j)
    }
}

/// The three filters run in lockstep over one stream.
pub struct Comparison {
    cfg: RunConfig,
    scheduler: UpdateScheduler,
    rectangular: WindowGraph,
    exponential: WindowGraph,
}

impl Comparison {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let p = &cfg.params;
        p.validate()?;
        if p.forgetting_factor == 0.0 {
            return Err(Error::InvalidParams(
                "the exponential baseline needs a forgetting factor above 0".into(),
            ));
        }
        let mut rectangular = WindowGraph::rectangular(p.equivalent_window_width(), p.prune_epsilon)?;
        let mut exponential = WindowGraph::exponential(p.decay_rate(), p.prune_epsilon)?;
        if cfg.lenient {
            rectangular = rectangular.lenient_time();
            exponential = exponential.lenient_time();
        }
        Ok(Self {
            scheduler: cfg.scheduler()?.capture_buffer(true),
            rectangular,
            exponential,
            cfg,
        })
    }

    pub fn scheduler(&self) -> &UpdateScheduler {
        &self.scheduler
    }

    pub fn push(&mut self, event: &InteractionEvent) -> Result<Vec<Sample>> {
        let pairs = expand_clique(event);
        let frames = self.scheduler.push_clique(event.timestamp, &pairs)?;
        // frames describe the state before this event; sample the windows first
        let samples = frames
            .iter()
            .map(|f| self.sample(f))
            .collect::<Result<Vec<_>>>()?;
        for p in &pairs {
            self.rectangular.ingest(p)?;
            self.exponential.ingest(p)?;
        }
        Ok(samples)
    }

    pub fn finish(&mut self) -> Result<Option<Sample>> {
        let fv = self.scheduler.buffer().consumed();
        for (name, w) in [("rectangular", &self.rectangular), ("exponential", &self.exponential)] {
            if w.consumed() != fv {
                return Err(Error::Lockstep(format!(
                    "{name} window consumed {} pairs (digest {:x}), buffer consumed {} (digest {:x})",
                    w.consumed().count(),
                    w.consumed().value(),
                    fv.count(),
                    fv.value()
                )));
            }
        }
        match self.scheduler.finish()? {
            Some(f) => self.sample(&f).map(Some),
            None => Ok(None),
        }
    }

    fn sample(&mut self, frame: &Frame) -> Result<Sample> {
        let t = frame.time;
        let p = &self.cfg.params;
        let conv = self.cfg.local_clustering;
        let buffered = frame.buffered.as_ref().expect("buffer capture enabled");
        let full_rect = self.rectangular.snapshot(t as f64)?;
        let full_exp = self.exponential.snapshot(t as f64)?;

        let levels = |full: &GraphView| {
            let top = full.top_subgraph(p.buffer_capacity);
            let vis = select_visualized(full, p);
            (top, vis)
        };
        let (rect_buf, rect_vis) = levels(&full_rect);
        let (exp_buf, exp_vis) = levels(&full_exp);

        let m = |g: &GraphView| MetricsRecord::measure(t, g, conv);
        let metrics = vec![
            (FilterKind::Fastviz, Level::Buffered, m(buffered)),
            (FilterKind::Fastviz, Level::Visualized, m(&frame.visualized)),
            (FilterKind::Rectangular, Level::Buffered, m(&rect_buf)),
            (FilterKind::Rectangular, Level::Visualized, m(&rect_vis)),
            (FilterKind::Rectangular, Level::Full, m(&full_rect)),
            (FilterKind::Exponential, Level::Buffered, m(&exp_buf)),
            (FilterKind::Exponential, Level::Visualized, m(&exp_vis)),
            (FilterKind::Exponential, Level::Full, m(&full_exp)),
        ];
        let j = |a: &GraphView, b: &GraphView| jaccard(a.node_names(), b.node_names());
        let jaccard = vec![
            (FilterKind::Rectangular, Level::Buffered, j(buffered, &rect_buf)),
            (FilterKind::Rectangular, Level::Visualized, j(&frame.visualized, &rect_vis)),
            (FilterKind::Exponential, Level::Buffered, j(buffered, &exp_buf)),
            (FilterKind::Exponential, Level::Visualized, j(&frame.visualized, &exp_vis)),
        ];
        Ok(Sample {
            time: t,
            metrics,
            jaccard,
        })
    }
}

pub const METRICS_HEADER: &str =
    "time,filter,level,n_nodes,avg_degree,global_clustering,avg_local_clustering,assortativity";
pub const JACCARD_HEADER: &str = "time,baseline,level,jaccard";

fn field(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_sample<M: Write, J: Write>(s: &Sample, metrics: &mut M, jac: &mut J) -> Result<()> {
    for (f, l, r) in &s.metrics {
        writeln!(
            metrics,
            "{},{},{},{},{},{},{},{}",
            s.time,
            f.as_str(),
            l.as_str(),
            r.node_count,
            field(r.avg_degree),
            field(r.global_clustering),
            field(r.avg_local_clustering),
            field(r.assortativity)
        )?;
    }
    for (f, l, v) in &s.jaccard {
        writeln!(jac, "{},{},{},{}", s.time, f.as_str(), l.as_str(), v)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CompareSummary {
    #[serde(flatten)]
    pub input: IngestCounters,
    pub pairs: u64,
    pub samples: u64,
    pub pair_digest: String,
    pub peak_buffered_nodes: usize,
    pub peak_rectangular_nodes: usize,
    pub peak_exponential_nodes: usize,
}

/// Runs the comparison over `input`, writing metrics and similarity CSVs.
pub fn run_compare<R: BufRead, M: Write, J: Write>(
    input: R,
    metrics_out: &mut M,
    jaccard_out: &mut J,
    cfg: &RunConfig,
) -> Result<CompareSummary> {
    let mut cmp = Comparison::new(cfg.clone())?;
    let mut events = stream_events(input, cfg.strictness());
    writeln!(metrics_out, "{METRICS_HEADER}")?;
    writeln!(jaccard_out, "{JACCARD_HEADER}")?;
    let mut summary = CompareSummary::default();
    let mut record = |s: &Sample, summary: &mut CompareSummary| -> Result<()> {
        summary.samples += 1;
        let count = |f, l| s.metric(f, l).map_or(0, |r| r.node_count);
        summary.peak_buffered_nodes = summary
            .peak_buffered_nodes
            .max(count(FilterKind::Fastviz, Level::Buffered));
        summary.peak_rectangular_nodes = summary
            .peak_rectangular_nodes
            .max(count(FilterKind::Rectangular, Level::Full));
        summary.peak_exponential_nodes = summary
            .peak_exponential_nodes
            .max(count(FilterKind::Exponential, Level::Full));
        write_sample(s, metrics_out, jaccard_out)
    };
    for event in events.by_ref() {
        for s in cmp.push(&event?)? {
            record(&s, &mut summary)?;
        }
    }
    if let Some(s) = cmp.finish()? {
        record(&s, &mut summary)?;
    }
    metrics_out.flush()?;
    jaccard_out.flush()?;
    let digest = cmp.scheduler().buffer().consumed();
    summary.input = events.counters();
    summary.pairs = digest.count();
    summary.pair_digest = format!("{:016x}", digest.value());
    Ok(summary)
}
