use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use onfire_core::arch::Family;
use onfire_core::Architecture;

#[derive(Parser, Debug)]
#[command(name = "onfire", version, about = "Compact CNN fire detection and localisation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    Architecture::parse(s).map_err(|e| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: onfire_core::Error| e.to_string())
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(format!("threshold must lie in [0, 1], got {t}"))
    }
}

/// Which network to run and where its weights come from.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Architecture name, e.g. shufflenetv2-onfire, nasnet-a-onfire, shufflenet-v05.
    /// Defaults to the one recorded in --weights, else shufflenetv2-onfire.
    #[arg(long, value_parser = parse_arch)]
    pub arch: Option<Architecture>,
    /// OFW1 weight file. Without it the model is randomly initialised from --seed.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct SlicArgs {
    /// Requested number of superpixels per frame.
    #[arg(long = "superpixels", default_value_t = 100)]
    pub k: usize,
    /// SLIC compactness weight.
    #[arg(long, default_value_t = 10.0)]
    pub compactness: f64,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Fullframe,
    Superpixel,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Full-frame fire / no-fire decision for images or frame directories.
    Classify {
        /// PPM images, or directories of numbered PPM frames.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.5, value_parser = parse_threshold)]
        threshold: f64,
        /// Also write the results as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Superpixel localisation: writes a PGM mask and a PPM overlay per frame.
    Localize {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.5, value_parser = parse_threshold)]
        threshold: f64,
        #[command(flatten)]
        slic: SlicArgs,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Confusion counts and metrics over a fire/ + nofire/ dataset.
    Eval {
        dataset: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.5, value_parser = parse_threshold)]
        threshold: f64,
        /// Write `metric,value` CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-stream throughput at batch size 1.
    Bench {
        /// Frames to cycle through; synthetic frames are used when empty.
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Mode::Fullframe)]
        mode: Mode,
        #[arg(long, default_value_t = 20)]
        frames: usize,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        #[command(flatten)]
        slic: SlicArgs,
    },
    /// Removes the k lowest-norm filters of the ShuffleNet final convolution.
    Prune {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of filters to remove.
        #[arg(long, short = 'k')]
        filters: usize,
        /// Where to write the pruned weights.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrains only the classifier head on a fire/ + nofire/ dataset.
    FinetuneHead {
        dataset: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0005)]
        lr: f64,
        #[arg(long, default_value_t = 40)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        /// Where to write the tuned weights.
        #[arg(long)]
        out: PathBuf,
        /// Loss curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Learnable parameter count of an architecture.
    Params {
        #[arg(long, value_parser = parse_arch, default_value = "shufflenetv2-onfire")]
        arch: Architecture,
        /// Per-cell and per-layer counts as well.
        #[arg(long)]
        breakdown: bool,
    },
    /// Parameter table of a variant family.
    Variants {
        #[arg(value_parser = parse_family)]
        family: Family,
    },
    /// Writes seeded random weights for an architecture.
    Init {
        #[arg(long, value_parser = parse_arch, default_value = "shufflenetv2-onfire")]
        arch: Architecture,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}
