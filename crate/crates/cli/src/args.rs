use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mosaic_core::pipeline::{BackendKind, ConfigLayer, EmptyMaskPolicy};
use mosaic_core::{OverlapPolicy, UncoveredPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "mosaic",
    version,
    about = "Multi-object text-driven image stylization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stylize an image and write composite, masks, frames and a manifest.
    Run(RunArgs),
    /// Score a stylized image with patch-wise CLIP similarity.
    Eval(EvalArgs),
    /// Time each pipeline stage over repeated runs.
    Bench(BenchArgs),
    /// Segment a prompt and print its serialized pairs.
    Parse(ParseArgs),
    /// Prompt corpus utilities.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// Key-value config file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long, value_parser = ["mock", "http"])]
    pub backend: Option<String>,
    /// Sidecar base URL; defaults to $MOSAIC_ENDPOINT.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "MS")]
    pub timeout_ms: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub common: BackendArgs,
    #[arg(long, value_name = "last-wins|first-wins")]
    pub overlap_policy: Option<OverlapPolicy>,
    #[arg(long, value_name = "content|background:<style>")]
    pub uncovered: Option<UncoveredPolicy>,
    #[arg(long, value_parser = ["skip", "abort"])]
    pub on_empty_mask: Option<String>,
    /// Bypass the image-encoding cache.
    #[arg(long)]
    pub no_cache: bool,
    #[arg(long, value_name = "N")]
    pub cache_capacity: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: BackendArgs,
    /// Directory of mask_NNN.png files, one per pair ordinal.
    #[arg(long, value_name = "DIR", conflicts_with = "run_dir")]
    pub masks: Option<PathBuf>,
    /// Output directory of a previous `mosaic run`.
    #[arg(long, value_name = "DIR")]
    pub run_dir: Option<PathBuf>,
    /// Multiplier for the scaled aggregate.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Report file; printed to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,
    /// Emit the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub prompt: String,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Generate a seeded synthetic prompt corpus as JSON lines.
    Gen(CorpusGenArgs),
}

#[derive(Debug, Args)]
pub struct CorpusGenArgs {
    #[arg(long, value_name = "FILE")]
    pub classes: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub styles: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub templates: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

impl BackendArgs {
    pub fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            image: self.image.clone(),
            prompt: self.prompt.clone(),
            backend: self.backend.as_deref().map(|b| match b {
                "http" => BackendKind::Http,
                _ => BackendKind::Mock,
            }),
            endpoint: self.endpoint.clone(),
            seed: self.seed,
            timeout_ms: self.timeout_ms,
            workers: self.workers,
            ..ConfigLayer::default()
        }
    }
}

impl PipelineArgs {
    pub fn layer(&self) -> ConfigLayer {
        let mut layer = self.common.layer();
        layer.overlap_policy = self.overlap_policy;
        layer.uncovered = self.uncovered.clone();
        layer.on_empty_mask = self.on_empty_mask.as_deref().map(|p| match p {
            "abort" => EmptyMaskPolicy::Abort,
            _ => EmptyMaskPolicy::Skip,
        });
        layer.cache.capacity = self.cache_capacity;
        if self.no_cache {
            layer.cache.enabled = Some(false);
        }
        layer
    }
}
