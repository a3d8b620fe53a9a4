//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::curvature::{DEFAULT_BETA, DEFAULT_EXPONENT};
use crate::energy::{AttractionMode, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::lattice::{load_image, load_seeds, SeedMask};
use crate::qpbo::{FillPolicy, DEFAULT_MAX_ROUNDS, DEFAULT_SCALE};
use crate::segmenter::{save_result, segment, SegmentationParams};
use crate::synthcorpus::{control_corpus, export_corpus, load_corpus};

/// Caps the worker count of `corpus eval` and of the service.
pub const THREADS_ENV: &str = "CURVSEG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "curvseg", version, about = "Seeded curvature-regularized segmentation")]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment one image.
    Segment(SegmentArgs),
    /// Export or evaluate the control corpus.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Seed image; repeat to merge several files.
    #[arg(long, required = true)]
    pub seeds: Vec<PathBuf>,
    /// Mask output (PNG); the report goes next to it with a .txt extension.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Write every control case as image.pgm, seeds.pgm, truth.pgm.
    Export {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Segment every case under a directory and score it against its truth.
    Eval {
        #[arg(long)]
        dir: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Directory served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Requests allowed to wait for a worker before new ones get 503.
    #[arg(long, default_value_t = 64)]
    pub queue_limit: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long, default_value_t = DEFAULT_EXPONENT)]
    pub p: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value = "magnitude")]
    pub mode: AttractionMode,
    #[arg(long)]
    pub no_probe: bool,
    #[arg(long, default_value = "bg")]
    pub fallback: FillPolicy,
    /// Hard-seed penalty; derived from the energy when omitted.
    #[arg(long)]
    pub seed_penalty: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
    pub max_rounds: usize,
}

impl ParamArgs {
    pub fn to_params(&self) -> SegmentationParams {
        SegmentationParams {
            p: self.p,
            beta: self.beta,
            lambda: self.lambda,
            mode: self.mode,
            seed_penalty: self.seed_penalty,
            probing: !self.no_probe,
            fallback: self.fallback,
            max_rounds: self.max_rounds,
            scale: DEFAULT_SCALE,
        }
    }
}

/// Worker count from `CURVSEG_THREADS`, or `None` when unset or invalid.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match CliConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(config, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(config: CliConfig, out: &mut dyn Write) -> Result<()> {
    match config.command {
        Command::Segment(args) => run_segment(&args, out),
        Command::Corpus(CorpusCommand::Export { dir }) => {
            export_corpus(&control_corpus(), &dir)?;
            let _ = writeln!(out, "exported {} cases to {}", control_corpus().len(), dir.display());
            Ok(())
        }
        Command::Corpus(CorpusCommand::Eval { dir, params }) => {
            for line in eval_corpus(&dir, &params.to_params())? {
                let _ = writeln!(out, "{line}");
            }
            Ok(())
        }
        Command::Serve(args) => crate::service::serve(
            &args.addr,
            crate::service::ServiceConfig {
                workers: thread_cap().unwrap_or_else(default_workers),
                queue_limit: args.queue_limit,
                static_dir: args.static_dir,
            },
        ),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Loads and merges every seed file; overlapping opposite classes fail.
pub fn load_merged_seeds(paths: &[PathBuf]) -> Result<SeedMask> {
    let (first, rest) = paths
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("no seed file given".into()))?;
    let mut seeds = load_seeds(first)?;
    for p in rest {
        seeds.merge(&load_seeds(p)?)?;
    }
    Ok(seeds)
}

pub fn run_segment(args: &SegmentArgs, out: &mut dyn Write) -> Result<()> {
    let params = args.params.to_params();
    params.validate()?;
    let image = load_image(&args.image)?;
    let seeds = load_merged_seeds(&args.seeds)?;
    let result = segment(&image, &seeds, &params)?;
    let report = save_result(&result, &args.out)?;
    let _ = writeln!(
        out,
        "mask={} report={} {}",
        args.out.display(),
        report.display(),
        result.summary()
    );
    Ok(())
}

/// One `name dice=.. unlabeled=.. energy=.. ms=..` line per case, in name
/// order.
pub fn eval_corpus(dir: &Path, params: &SegmentationParams) -> Result<Vec<String>> {
    params.validate()?;
    let cases = load_corpus(dir)?;
    if cases.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no corpus cases under {}",
            dir.display()
        )));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| {
        cases
            .par_iter()
            .map(|case| {
                let r = segment(&case.image, &case.seeds, params)?;
                Ok(format!(
                    "{} dice={:.6} unlabeled={} energy={} ms={:.1}",
                    case.name,
                    r.mask.dice(&case.ground_truth),
                    r.report.unlabeled_count,
                    r.report.energy,
                    r.report.runtime_ms
                ))
            })
            .collect()
    })
}
