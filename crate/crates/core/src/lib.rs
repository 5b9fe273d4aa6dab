//! Multi-object text-driven image stylization: prompt segmentation, model
//! backends, encoding cache, compositing, patch-wise scoring and the
//! end-to-end pipeline.

pub mod backends;
pub mod cache;
pub mod compositor;
pub mod evaluator;
pub mod hashing;
pub mod pipeline;
pub mod prompt;
pub mod raster;

pub use backends::{
    BackendError, Backends, Embedding, EmbeddingSource, HttpBackend, ImageEmbedder, ImageEncoder,
    ImageEncoding, MaskGenerator, MockBackend, StylizedSet, Stylizer, TextEncoder, EMBEDDING_DIM,
};
pub use cache::{CacheStats, EncodingCache};
pub use compositor::{
    composite, coverage_report, mask_bbox, resolve_overlaps, BBox, CompositeError, CompositePolicy,
    Coverage, OverlapPolicy, StyleAssignment, UncoveredPolicy,
};
pub use evaluator::{patchwise_clip_score, EvalError, ScoreConfig, ScoreReport};
pub use pipeline::{
    run_bench, run_eval, run_pipeline, ConfigLayer, Manifest, Pipeline, PipelineConfig,
    PipelineError, RunOptions, RunOutput, Stage, StageTiming,
};
pub use prompt::{
    deserialize_pairs, parse_prompt, serialize_pairs, GrammarConfig, ObjectStylePair, Prompt,
    PromptError, SegmentedPrompt,
};
pub use raster::{ImageRgb, Mask, RasterError};
