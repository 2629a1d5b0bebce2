use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fastviz::harness::{run_compare, run_filter, RunConfig};
use fastviz::metrics::LocalClustering;
use fastviz::synth::{write_stream, SynthSpec};
use fastviz::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "fastviz", version, about = "Filter and animate large dynamic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter an interaction stream into JSON graph updates.
    Filter {
        #[command(flatten)]
        common: CommonArgs,
        /// Update stream destination ("-" for stdout).
        #[arg(long, default_value = "-")]
        updates_out: PathBuf,
    },
    /// Run the buffered filter and both sliding windows side by side.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        metrics_out: PathBuf,
        #[arg(long)]
        jaccard_out: PathBuf,
    },
    /// Generate a synthetic bursty stream.
    Synth {
        /// JSON file describing the stream to generate.
        #[arg(long)]
        spec: PathBuf,
        /// Destination ("-" for stdout).
        #[arg(long, default_value = "-")]
        out: PathBuf,
        /// Overrides the seed given in the file.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Input stream ("-" for stdin).
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    buffer_capacity: Option<usize>,
    #[arg(long)]
    visual_capacity: Option<usize>,
    #[arg(long)]
    forgetting_factor: Option<f64>,
    /// Forgetting period in data seconds.
    #[arg(long)]
    forgetting_period: Option<i64>,
    /// Minimum edge weight for visualization.
    #[arg(long)]
    edge_threshold: Option<f64>,
    /// Data seconds per second of animation.
    #[arg(long)]
    time_contraction: Option<f64>,
    #[arg(long)]
    prune_epsilon: Option<f64>,
    #[arg(long)]
    fps: Option<u32>,
    /// Relative change below which updates are not sent.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Skip malformed lines and accept out-of-order timestamps.
    #[arg(long)]
    lenient: bool,
    #[arg(long, value_enum)]
    local_clustering: Option<LocalClustering>,
}

impl CommonArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
            None => RunConfig::default(),
        };
        let p = &mut cfg.params;
        macro_rules! set {
            ($($src:ident => $dst:expr),* $(,)?) => {
                $(if let Some(v) = self.$src { $dst = v; })*
            };
        }
        set! {
            buffer_capacity => p.buffer_capacity,
            visual_capacity => p.visual_capacity,
            forgetting_factor => p.forgetting_factor,
            forgetting_period => p.forgetting_period,
            edge_threshold => p.edge_threshold,
            time_contraction => p.time_contraction,
            prune_epsilon => p.prune_epsilon,
            fps => cfg.frames_per_second,
            rel_tol => cfg.rel_tol,
            local_clustering => cfg.local_clustering,
        }
        cfg.lenient |= self.lenient;
        cfg.params.validate()?;
        Ok(cfg)
    }
}

fn open_input(path: &Path) -> io::Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdin().lock()))
    } else {
        Ok(Box::new(BufReader::new(File::open(path)?)))
    }
}

fn open_output(path: &Path) -> io::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    #[serde(flatten)]
    summary: T,
    wall_time_secs: f64,
}

fn report<T: Serialize>(summary: T, started: Instant) {
    let r = Report {
        summary,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    eprintln!("{}", serde_json::to_string(&r).expect("summary serializes"));
}

fn run(cli: Cli) -> Result<(), Error> {
    let started = Instant::now();
    match cli.command {
        Command::Filter {
            common,
            updates_out,
        } => {
            let cfg = common.config()?;
            let input = open_input(&common.input)?;
            let mut out = open_output(&updates_out)?;
            let summary = run_filter(input, &mut out, &cfg)?;
            report(summary, started);
        }
        Command::Compare {
            common,
            metrics_out,
            jaccard_out,
        } => {
            let cfg = common.config()?;
            let input = open_input(&common.input)?;
            let mut m = open_output(&metrics_out)?;
            let mut j = open_output(&jaccard_out)?;
            let summary = run_compare(input, &mut m, &mut j, &cfg)?;
            report(summary, started);
        }
        Command::Synth { spec, out, seed } => {
            let mut spec: SynthSpec = serde_json::from_reader(BufReader::new(File::open(spec)?))?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let mut out = open_output(&out)?;
            let summary = write_stream(&spec, &mut out)?;
            out.flush()?;
            eprintln!(
                "{}",
                serde_json::json!({
                    "events": summary.events,
                    "pairs": summary.pairs,
                    "base_rate": summary.base_rate(),
                    "burst_rate": summary.burst_rate(),
                    "wall_time_secs": started.elapsed().as_secs_f64(),
                })
            );
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::OutOfOrder { .. } | Error::TimeRegression { .. } => EXIT_PARSE,
        Error::Io(_) => EXIT_IO,
        Error::Json(j) if j.is_io() => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fastviz: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
