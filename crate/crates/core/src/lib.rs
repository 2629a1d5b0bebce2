//! Streaming filter for large dynamic weighted networks.
//!
//! A chronological stream of clique interactions is reduced to a bounded
//! buffer of the strongest nodes ([`buffer`]), from which the strongest
//! subset is selected every frame and shipped as differential JSON updates
//! ([`update`]). Rectangular and exponential sliding windows ([`window`]) and
//! structural metrics ([`metrics`]) support side-by-side comparisons
//! ([`harness`]); [`synth`] generates bursty test streams.

pub mod buffer;
pub mod error;
pub mod graph;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod synth;
pub mod update;
pub mod window;

pub use buffer::{equivalent_window_width, retention_bound, BufferedGraph, FilterParams};
pub use error::{Error, ParseError, Result};
pub use graph::GraphView;
pub use ingest::{
    expand_clique, format_event, parse_event, stream_events, InteractionEvent, PairInteraction,
    Strictness,
};
pub use metrics::{jaccard, LocalClustering, MetricsRecord};
pub use update::{diff, select_visualized, serialize_update, DiffUpdate, UpdateScheduler};
pub use window::{top_subgraph, WindowGraph};
