//! Model-backend interfaces (text encoder, image encoder, crop embedder, mask
//! generator, stylizer), a bit-exact deterministic mock and an HTTP client
//! for the sidecar protocol.

mod http;
pub(crate) mod mock;
pub mod wire;

pub use http::HttpBackend;
pub use mock::MockBackend;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ImageRgb, Mask};

pub const EMBEDDING_DIM: usize = 512;
const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("bad backend response: {0}")]
    BadResponse(String),
    #[error("invalid request: {0}")]
    InvalidInput(String),
    #[error("image of {pixels} pixels exceeds backend limit of {limit}")]
    ImageTooLarge { pixels: u64, limit: u64 },
    #[error("unknown image encoding {0:?}")]
    UnknownEncoding(String),
    #[error("no mask found for {object:?}")]
    EmptyMask { object: String },
    #[error("backend returned {actual:?}, expected {expected:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    Text,
    ImageCrop,
}

/// Unit-norm vector of exactly [`EMBEDDING_DIM`] components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding {
    values: Vec<f64>,
    source: EmbeddingSource,
}

impl Embedding {
    /// Validates dimension and norm; never renormalizes.
    pub fn new(values: Vec<f64>, source: EmbeddingSource) -> Result<Self, BackendError> {
        if values.len() != EMBEDDING_DIM {
            return Err(BackendError::BadResponse(format!(
                "embedding has dimension {}, expected {EMBEDDING_DIM}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::BadResponse(
                "non-finite embedding component".into(),
            ));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(BackendError::BadResponse(format!(
                "embedding norm {norm} is not 1"
            )));
        }
        Ok(Embedding { values, source })
    }

    /// Scales `raw` to unit length. Panics on a zero vector.
    pub fn normalized(raw: Vec<f64>, source: EmbeddingSource) -> Result<Self, BackendError> {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm > 0.0, "cannot normalize a zero vector");
        Self::new(raw.into_iter().map(|v| v / norm).collect(), source)
    }

    /// The i-th standard basis vector.
    pub fn basis(i: usize, source: EmbeddingSource) -> Self {
        let mut values = vec![0.0; EMBEDDING_DIM];
        values[i] = 1.0;
        Embedding { values, source }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn with_source(mut self, source: EmbeddingSource) -> Self {
        self.source = source;
        self
    }
}

/// Handle to a backend-side image encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageEncoding {
    pub encoding_id: String,
    pub width: u32,
    pub height: u32,
}

/// One stylized full frame per distinct style phrase, in first-use order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StylizedSet {
    entries: Vec<(String, ImageRgb)>,
}

impl StylizedSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Frames must match the first frame's dimensions; a style already present
    /// is rejected.
    pub fn insert(
        &mut self,
        style: impl Into<String>,
        frame: ImageRgb,
    ) -> Result<(), BackendError> {
        let style = style.into();
        if self.get(&style).is_some() {
            return Err(BackendError::InvalidInput(format!(
                "duplicate style {style:?} in stylized set"
            )));
        }
        if let Some((_, first)) = self.entries.first() {
            if first.dims() != frame.dims() {
                return Err(BackendError::DimensionMismatch {
                    expected: first.dims(),
                    actual: frame.dims(),
                });
            }
        }
        self.entries.push((style, frame));
        Ok(())
    }

    pub fn get(&self, style: &str) -> Option<&ImageRgb> {
        self.entries
            .iter()
            .find(|(s, _)| s == style)
            .map(|(_, f)| f)
    }

    pub fn entries(&self) -> &[(String, ImageRgb)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub trait TextEncoder: Send + Sync {
    fn encode_text(&self, text: &str) -> Result<Embedding, BackendError>;
}

pub trait ImageEncoder: Send + Sync {
    fn encode_image(&self, img: &ImageRgb) -> Result<ImageEncoding, BackendError>;
}

/// Crop-level image embedding into the shared text/image space.
pub trait ImageEmbedder: Send + Sync {
    fn embed_image(&self, img: &ImageRgb) -> Result<Embedding, BackendError>;
}

pub trait MaskGenerator: Send + Sync {
    fn generate_mask(
        &self,
        enc: &ImageEncoding,
        object_text: &str,
        text_emb: &Embedding,
    ) -> Result<Mask, BackendError>;
}

pub trait Stylizer: Send + Sync {
    fn stylize(
        &self,
        img: &ImageRgb,
        style_phrase: &str,
        style_emb: &Embedding,
    ) -> Result<ImageRgb, BackendError>;
}

/// Everything the pipeline and evaluator need, possibly from different
/// implementations.
#[derive(Clone)]
pub struct Backends {
    pub text: Arc<dyn TextEncoder>,
    pub image: Arc<dyn ImageEncoder>,
    pub embed: Arc<dyn ImageEmbedder>,
    pub mask: Arc<dyn MaskGenerator>,
    pub stylizer: Arc<dyn Stylizer>,
}

impl Backends {
    pub fn uniform<B>(backend: Arc<B>) -> Self
    where
        B: TextEncoder + ImageEncoder + ImageEmbedder + MaskGenerator + Stylizer + 'static,
    {
        Backends {
            text: backend.clone(),
            image: backend.clone(),
            embed: backend.clone(),
            mask: backend.clone(),
            stylizer: backend,
        }
    }

    pub fn mock() -> Self {
        Self::uniform(Arc::new(MockBackend::new()))
    }
}

pub(crate) fn check_text(text: &str) -> Result<(), BackendError> {
    if text.trim().is_empty() {
        return Err(BackendError::InvalidInput("empty text".into()));
    }
    Ok(())
}
