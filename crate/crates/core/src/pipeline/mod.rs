//! End-to-end driver: parse, encode, segment, stylize, composite, persist.

mod config;
mod timing;

pub use config::{
    BackendKind, CacheSection, ConfigError, ConfigLayer, EmptyMaskPolicy, PipelineConfig,
    DEFAULT_TIMEOUT_MS, DEFAULT_WORKERS, ENDPOINT_ENV,
};
pub use timing::{BenchReport, BenchRow, Stage, StageTiming};

use std::fmt;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, Backends, Embedding, HttpBackend, StylizedSet};
use crate::cache::{CacheStats, EncodingCache, Lookup};
use crate::compositor::{
    composite, coverage_report, resolve_overlaps, CompositeError, CompositePolicy, Coverage,
    StyleAssignment, UncoveredPolicy,
};
use crate::evaluator::{patchwise_clip_score, EvalError, ScoreConfig, ScoreReport};
use crate::prompt::{parse_prompt, GrammarConfig, Prompt, PromptError, SegmentedPrompt};
use crate::raster::{ImageRgb, Mask, RasterError};
use timing::StageClock;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPOSITE_FILE: &str = "composite.png";
pub const MANIFEST_VERSION: u32 = 1;

pub fn mask_file_name(ordinal: usize) -> String {
    format!("masks/mask_{ordinal:03}.png")
}

pub fn frame_file_name(index: usize) -> String {
    format!("frames/style_{index:03}.png")
}

/// Where a failure happened: a pipeline stage or one of the surrounding steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageTag {
    Config,
    Connect,
    Load,
    Run(Stage),
    Persist,
    Eval,
}

impl fmt::Display for StageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageTag::Config => f.write_str("config"),
            StageTag::Connect => f.write_str("connect"),
            StageTag::Load => f.write_str("load"),
            StageTag::Run(s) => write!(f, "{s}"),
            StageTag::Persist => f.write_str("persist"),
            StageTag::Eval => f.write_str("eval"),
        }
    }
}

#[derive(Debug, Error)]
pub enum FailureKind {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Parse(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    /// An object produced no mask and the run was configured to abort.
    #[error("segmentation: {0}")]
    Segmentation(BackendError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("missing artifacts: {0}")]
    MissingArtifacts(String),
}

#[derive(Debug, Error)]
#[error("[{stage}] {kind}")]
pub struct PipelineError {
    pub stage: StageTag,
    pub kind: FailureKind,
}

impl PipelineError {
    pub fn new(stage: StageTag, kind: impl Into<FailureKind>) -> Self {
        PipelineError {
            stage,
            kind: kind.into(),
        }
    }

    fn io(stage: StageTag, what: impl fmt::Display) -> Self {
        Self::new(stage, FailureKind::Io(what.to_string()))
    }

    /// Process exit code: 2 config, 3 backend, 4 parse, 5 segmentation,
    /// 1 for anything else (IO, missing artifacts, internal).
    pub fn exit_code(&self) -> i32 {
        match &self.kind {
            FailureKind::Config(_) => 2,
            FailureKind::Backend(_) | FailureKind::Eval(EvalError::Backend(_)) => 3,
            FailureKind::Parse(_) => 4,
            FailureKind::Segmentation(_) => 5,
            _ => 1,
        }
    }
}

fn raster_err(stage: StageTag, path: &Path) -> impl FnOnce(RasterError) -> PipelineError + '_ {
    move |e| PipelineError::io(stage, format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub policy: CompositePolicy,
    pub on_empty_mask: EmptyMaskPolicy,
}

impl RunOptions {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        RunOptions {
            policy: cfg.policy.clone(),
            on_empty_mask: cfg.on_empty_mask,
        }
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            policy: CompositePolicy::default(),
            on_empty_mask: EmptyMaskPolicy::Skip,
        }
    }
}

/// In-memory result of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub pairs: SegmentedPrompt,
    /// Raw mask per pair in ordinal order; `None` for skipped objects.
    pub masks: Vec<Option<Mask>>,
    /// Pairwise-disjoint masks for the kept objects, ordinal order.
    pub resolved: Vec<(usize, Mask)>,
    pub stylized: StylizedSet,
    pub composite: ImageRgb,
    pub timings: Vec<StageTiming>,
    pub coverage: Coverage,
    pub skipped: Vec<usize>,
}

impl RunOutput {
    pub fn timing(&self, stage: Stage) -> &StageTiming {
        self.timings
            .iter()
            .find(|t| t.stage == stage)
            .expect("one timing per stage")
    }

    /// Masks for the evaluator: skipped objects become empty masks.
    pub fn eval_masks(&self) -> Vec<Mask> {
        let (w, h) = self.composite.dims();
        self.masks
            .iter()
            .map(|m| m.clone().unwrap_or_else(|| Mask::empty(w, h)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPair {
    pub ordinal: usize,
    pub object: String,
    pub style: String,
    /// Relative path of the raw mask; absent when the object was skipped.
    pub mask: Option<String>,
    pub frame: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub style: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: PipelineConfig,
    pub image_hash: String,
    pub width: u32,
    pub height: u32,
    pub pairs: Vec<ManifestPair>,
    pub frames: Vec<ManifestFrame>,
    pub composite: String,
    pub skipped: Vec<usize>,
    pub coverage: Coverage,
    pub cache: Option<CacheStats>,
    pub timings: Vec<StageTiming>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(PipelineError::new(
                StageTag::Eval,
                FailureKind::MissingArtifacts(path.display().to_string()),
            ));
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::io(StageTag::Eval, format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            PipelineError::new(
                StageTag::Eval,
                FailureKind::MissingArtifacts(format!("{}: {e}", path.display())),
            )
        })
    }

    pub fn segmented_prompt(&self) -> Result<SegmentedPrompt, PipelineError> {
        SegmentedPrompt::new(
            self.pairs
                .iter()
                .map(|p| (p.object.as_str(), p.style.as_str())),
        )
        .map_err(|e| PipelineError::new(StageTag::Eval, e))
    }
}

pub fn build_backends(cfg: &PipelineConfig) -> Result<Backends, PipelineError> {
    match cfg.backend {
        BackendKind::Mock => Ok(Backends::mock()),
        BackendKind::Http => {
            let endpoint = cfg.endpoint.as_deref().unwrap_or_default();
            let client = HttpBackend::connect(endpoint, cfg.timeout())
                .map_err(|e| PipelineError::new(StageTag::Connect, e))?;
            Ok(Backends::uniform(Arc::new(client)))
        }
    }
}

pub struct Pipeline {
    backends: Backends,
    cache: Option<EncodingCache>,
    pool: rayon::ThreadPool,
    grammar: GrammarConfig,
}

impl Pipeline {
    pub fn new(backends: Backends, cache: Option<EncodingCache>, workers: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .thread_name(|i| format!("mosaic-worker-{i}"))
            .build()
            .expect("worker pool");
        Pipeline {
            backends,
            cache,
            pool,
            grammar: GrammarConfig::default(),
        }
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()
            .map_err(|e| PipelineError::new(StageTag::Config, e))?;
        let backends = build_backends(cfg)?;
        let cache = cfg
            .cache_enabled
            .then(|| EncodingCache::new(NonZeroUsize::new(cfg.cache_capacity).expect("validated")));
        Ok(Self::new(backends, cache, cfg.workers))
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    pub fn cache(&self) -> Option<&EncodingCache> {
        self.cache.as_ref()
    }

    pub fn cache_stats(&self) -> Option<CacheStats> {
        self.cache.as_ref().map(EncodingCache::stats)
    }

    /// Runs every stage on an in-memory image without touching the disk.
    pub fn execute(
        &self,
        content: &ImageRgb,
        prompt: &str,
        opts: &RunOptions,
    ) -> Result<RunOutput, PipelineError> {
        let tag = StageTag::Run;
        let dims = content.dims();
        let mut timings = Vec::with_capacity(Stage::ALL.len());

        let clock = StageClock::start();
        let pairs = Prompt::new(prompt)
            .and_then(|p| parse_prompt(&p, &self.grammar))
            .map_err(|e| PipelineError::new(tag(Stage::Parse), e))?;
        timings.push(clock.stop(Stage::Parse, 1));

        let mut styles: Vec<String> = pairs
            .distinct_styles()
            .into_iter()
            .map(String::from)
            .collect();
        if let UncoveredPolicy::BackgroundStyle(bg) = &opts.policy.uncovered {
            if !styles.contains(bg) {
                styles.push(bg.clone());
            }
        }

        let clock = StageClock::start();
        let text = &*self.backends.text;
        let (object_embs, style_embs) = self
            .pool
            .install(|| {
                let objects = pairs
                    .pairs()
                    .par_iter()
                    .map(|p| text.encode_text(&p.object_phrase))
                    .collect::<Result<Vec<Embedding>, _>>()?;
                let styles = styles
                    .par_iter()
                    .map(|s| text.encode_text(s))
                    .collect::<Result<Vec<Embedding>, _>>()?;
                Ok::<_, BackendError>((objects, styles))
            })
            .map_err(|e| PipelineError::new(tag(Stage::EncodeText), e))?;
        timings.push(clock.stop(Stage::EncodeText, (pairs.len() + styles.len()) as u64));

        let clock = StageClock::start();
        let (encoding, encoded) = match &self.cache {
            Some(cache) => cache
                .lookup(content, &*self.backends.image)
                .map(|(enc, how)| (enc, u64::from(how == Lookup::Miss))),
            None => self
                .backends
                .image
                .encode_image(content)
                .map(|enc| (enc, 1)),
        }
        .map_err(|e| PipelineError::new(tag(Stage::EncodeImage), e))?;
        timings.push(clock.stop(Stage::EncodeImage, encoded));

        let clock = StageClock::start();
        let mask_gen = &*self.backends.mask;
        let generated: Vec<Result<Mask, BackendError>> = self.pool.install(|| {
            pairs
                .pairs()
                .par_iter()
                .zip(object_embs.par_iter())
                .map(|(p, emb)| {
                    let m = mask_gen.generate_mask(&encoding, &p.object_phrase, emb)?;
                    if m.dims() != dims {
                        return Err(BackendError::DimensionMismatch {
                            expected: dims,
                            actual: m.dims(),
                        });
                    }
                    if m.is_empty() {
                        return Err(BackendError::EmptyMask {
                            object: p.object_phrase.clone(),
                        });
                    }
                    Ok(m)
                })
                .collect()
        });
        let mut masks = Vec::with_capacity(pairs.len());
        let mut skipped = Vec::new();
        for (ordinal, r) in generated.into_iter().enumerate() {
            match r {
                Ok(m) => masks.push(Some(m)),
                Err(e @ BackendError::EmptyMask { .. }) => {
                    if opts.on_empty_mask == EmptyMaskPolicy::Abort {
                        return Err(PipelineError::new(
                            tag(Stage::Mask),
                            FailureKind::Segmentation(e),
                        ));
                    }
                    skipped.push(ordinal);
                    masks.push(None);
                }
                Err(e) => return Err(PipelineError::new(tag(Stage::Mask), e)),
            }
        }
        timings.push(clock.stop(Stage::Mask, pairs.len() as u64));

        let clock = StageClock::start();
        let stylizer = &*self.backends.stylizer;
        let frames = self
            .pool
            .install(|| {
                styles
                    .par_iter()
                    .zip(style_embs.par_iter())
                    .map(|(s, emb)| {
                        let frame = stylizer.stylize(content, s, emb)?;
                        if frame.dims() != dims {
                            return Err(BackendError::DimensionMismatch {
                                expected: dims,
                                actual: frame.dims(),
                            });
                        }
                        Ok(frame)
                    })
                    .collect::<Result<Vec<ImageRgb>, _>>()
            })
            .map_err(|e| PipelineError::new(tag(Stage::Stylize), e))?;
        let mut stylized = StylizedSet::new();
        for (s, frame) in styles.iter().zip(frames) {
            stylized
                .insert(s.clone(), frame)
                .map_err(|e| PipelineError::new(tag(Stage::Stylize), e))?;
        }
        timings.push(clock.stop(Stage::Stylize, styles.len() as u64));

        let clock = StageClock::start();
        let composite_err =
            |e| PipelineError::new(tag(Stage::Composite), FailureKind::Composite(e));
        let kept: Vec<(usize, &Mask)> = masks
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.as_ref().map(|m| (i, m)))
            .collect();
        let raw: Vec<Mask> = kept.iter().map(|(_, m)| (*m).clone()).collect();
        let resolved = resolve_overlaps(&raw, opts.policy.overlap).map_err(composite_err)?;
        let coverage = coverage_report(&raw).map_err(composite_err)?;
        let assignments: Vec<StyleAssignment> = kept
            .iter()
            .zip(&resolved)
            .map(|((ordinal, _), m)| StyleAssignment {
                mask: m.clone(),
                styled: stylized
                    .get(&pairs.pairs()[*ordinal].style_phrase)
                    .expect("every style stylized")
                    .clone(),
                ordinal: *ordinal,
            })
            .collect();
        let background = match &opts.policy.uncovered {
            UncoveredPolicy::BackgroundStyle(s) => stylized.get(s),
            UncoveredPolicy::ContentPassthrough => None,
        };
        let out =
            composite(content, &assignments, &opts.policy, background).map_err(composite_err)?;
        timings.push(clock.stop(Stage::Composite, 1));

        Ok(RunOutput {
            resolved: kept.iter().map(|(i, _)| *i).zip(resolved).collect(),
            pairs,
            masks,
            stylized,
            composite: out,
            timings,
            coverage,
            skipped,
        })
    }

    /// Loads the configured image, runs, and writes all artifacts to
    /// `cfg.out_dir`. Nothing is written when loading or any stage fails.
    pub fn run(&self, cfg: &PipelineConfig) -> Result<(RunOutput, Manifest), PipelineError> {
        let content = ImageRgb::load(&cfg.image).map_err(raster_err(StageTag::Load, &cfg.image))?;
        let output = self.execute(&content, &cfg.prompt, &RunOptions::from_config(cfg))?;
        let manifest = self.manifest(cfg, &content, &output);
        persist(&cfg.out_dir, &output, &manifest)?;
        Ok((output, manifest))
    }

    fn manifest(&self, cfg: &PipelineConfig, content: &ImageRgb, out: &RunOutput) -> Manifest {
        let frame_index = |style: &str| {
            out.stylized
                .entries()
                .iter()
                .position(|(s, _)| s == style)
                .expect("style stylized")
        };
        Manifest {
            version: MANIFEST_VERSION,
            config: cfg.clone(),
            image_hash: format!("{:016x}", content.pixel_hash()),
            width: content.width(),
            height: content.height(),
            pairs: out
                .pairs
                .pairs()
                .iter()
                .map(|p| ManifestPair {
                    ordinal: p.ordinal,
                    object: p.object_phrase.clone(),
                    style: p.style_phrase.clone(),
                    mask: out.masks[p.ordinal]
                        .as_ref()
                        .map(|_| mask_file_name(p.ordinal)),
                    frame: frame_file_name(frame_index(&p.style_phrase)),
                })
                .collect(),
            frames: out
                .stylized
                .entries()
                .iter()
                .enumerate()
                .map(|(i, (s, _))| ManifestFrame {
                    style: s.clone(),
                    file: frame_file_name(i),
                })
                .collect(),
            composite: COMPOSITE_FILE.to_string(),
            skipped: out.skipped.clone(),
            coverage: out.coverage,
            cache: self.cache_stats(),
            timings: out.timings.clone(),
        }
    }

    /// Repeats [`execute`](Self::execute) on the same image; the first
    /// iteration is reported as cold, the rest as warm.
    pub fn bench(
        &self,
        content: &ImageRgb,
        prompt: &str,
        opts: &RunOptions,
        iterations: usize,
    ) -> Result<BenchReport, PipelineError> {
        if iterations == 0 {
            return Err(PipelineError::new(
                StageTag::Config,
                ConfigError::Invalid {
                    key: "iterations",
                    message: "must be at least 1".into(),
                },
            ));
        }
        let runs = (0..iterations)
            .map(|_| self.execute(content, prompt, opts).map(|o| o.timings))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BenchReport::from_runs(&runs, self.cache.is_some()))
    }
}

fn persist(dir: &Path, out: &RunOutput, manifest: &Manifest) -> Result<(), PipelineError> {
    let stage = StageTag::Persist;
    let mkdir = |p: PathBuf| {
        std::fs::create_dir_all(&p)
            .map_err(|e| PipelineError::io(stage, format!("{}: {e}", p.display())))
    };
    mkdir(dir.join("masks"))?;
    mkdir(dir.join("frames"))?;
    let path = dir.join(COMPOSITE_FILE);
    out.composite
        .save(&path)
        .map_err(raster_err(stage, &path))?;
    for (ordinal, m) in out.masks.iter().enumerate() {
        if let Some(m) = m {
            let path = dir.join(mask_file_name(ordinal));
            m.save(&path).map_err(raster_err(stage, &path))?;
        }
    }
    for (i, (_, frame)) in out.stylized.entries().iter().enumerate() {
        let path = dir.join(frame_file_name(i));
        frame.save(&path).map_err(raster_err(stage, &path))?;
    }
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text + "\n")
        .map_err(|e| PipelineError::io(stage, format!("{}: {e}", path.display())))
}

/// Builds the pipeline from `cfg`, runs it once and persists the artifacts.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(RunOutput, Manifest), PipelineError> {
    Pipeline::from_config(cfg)?.run(cfg)
}

pub fn run_bench(cfg: &PipelineConfig, iterations: usize) -> Result<BenchReport, PipelineError> {
    let pipeline = Pipeline::from_config(cfg)?;
    let content = ImageRgb::load(&cfg.image).map_err(raster_err(StageTag::Load, &cfg.image))?;
    pipeline.bench(
        &content,
        &cfg.prompt,
        &RunOptions::from_config(cfg),
        iterations,
    )
}

/// Scores the composite of a previous run found in `cfg.out_dir`.
pub fn run_eval(cfg: &PipelineConfig) -> Result<ScoreReport, PipelineError> {
    let dir = &cfg.out_dir;
    let manifest = Manifest::load(dir)?;
    let pairs = manifest.segmented_prompt()?;
    let missing = |p: &Path| {
        PipelineError::new(
            StageTag::Eval,
            FailureKind::MissingArtifacts(p.display().to_string()),
        )
    };
    let load_image = |p: PathBuf| {
        if !p.is_file() {
            return Err(missing(&p));
        }
        ImageRgb::load(&p).map_err(raster_err(StageTag::Eval, &p))
    };
    let img = load_image(dir.join(&manifest.composite))?;
    let masks = manifest
        .pairs
        .iter()
        .map(|p| match &p.mask {
            None => Ok(Mask::empty(img.width(), img.height())),
            Some(rel) => {
                let path = dir.join(rel);
                if !path.is_file() {
                    return Err(missing(&path));
                }
                Mask::load(&path).map_err(raster_err(StageTag::Eval, &path))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    score(cfg, &img, &pairs, &masks)
}

/// Scores an arbitrary image against a prompt with masks read from
/// `masks_dir/mask_NNN.png`; absent files count as empty masks.
pub fn eval_from_dir(cfg: &PipelineConfig, masks_dir: &Path) -> Result<ScoreReport, PipelineError> {
    let img = ImageRgb::load(&cfg.image).map_err(raster_err(StageTag::Load, &cfg.image))?;
    let pairs = Prompt::new(cfg.prompt.as_str())
        .and_then(|p| parse_prompt(&p, &GrammarConfig::default()))
        .map_err(|e| PipelineError::new(StageTag::Run(Stage::Parse), e))?;
    if !masks_dir.is_dir() {
        return Err(PipelineError::new(
            StageTag::Eval,
            FailureKind::MissingArtifacts(masks_dir.display().to_string()),
        ));
    }
    let masks = (0..pairs.len())
        .map(|i| {
            let name = mask_file_name(i);
            let path = masks_dir.join(name.trim_start_matches("masks/"));
            if path.is_file() {
                Mask::load(&path).map_err(raster_err(StageTag::Eval, &path))
            } else {
                Ok(Mask::empty(img.width(), img.height()))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    score(cfg, &img, &pairs, &masks)
}

fn score(
    cfg: &PipelineConfig,
    img: &ImageRgb,
    pairs: &SegmentedPrompt,
    masks: &[Mask],
) -> Result<ScoreReport, PipelineError> {
    let backends = build_backends(cfg)?;
    let score_cfg = ScoreConfig {
        scale: cfg.scale,
        ..ScoreConfig::new(cfg.seed)
    };
    patchwise_clip_score(
        img,
        pairs,
        masks,
        &*backends.text,
        &*backends.embed,
        &score_cfg,
    )
    .map_err(|e| PipelineError::new(StageTag::Eval, e))
}
