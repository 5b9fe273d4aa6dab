//! Pipeline configuration: a TOML file layered under command-line overrides.
//!
//! ```toml
//! image = "street.png"
//! prompt = "car in pop art style and sky as starry night"
//! backend = "mock"            # or "http"
//! endpoint = "http://127.0.0.1:8700"
//! overlap_policy = "last-wins" # or "first-wins"
//! uncovered = "content"        # or "background:<style>"
//! on_empty_mask = "skip"       # or "abort"
//! seed = 0
//! out_dir = "out"
//! timeout_ms = 30000
//! workers = 4
//! scale = 1.0
//!
//! [cache]
//! capacity = 8
//! enabled = true
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::DEFAULT_CAPACITY;
use crate::compositor::{CompositePolicy, OverlapPolicy, UncoveredPolicy};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
pub const DEFAULT_WORKERS: usize = 4;
pub const ENDPOINT_ENV: &str = "MOSAIC_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("reading {path}: {message}")]
    Read { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(ConfigError::Invalid {
                key: "backend",
                message: format!("{other:?} (expected mock or http)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyMaskPolicy {
    /// Drop the object from compositing and scoring, keep going.
    #[default]
    Skip,
    Abort,
}

impl std::str::FromStr for EmptyMaskPolicy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skip" => Ok(EmptyMaskPolicy::Skip),
            "abort" => Ok(EmptyMaskPolicy::Abort),
            other => Err(ConfigError::Invalid {
                key: "on_empty_mask",
                message: format!("{other:?} (expected skip or abort)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSection {
    pub capacity: Option<usize>,
    pub enabled: Option<bool>,
}

/// One configuration layer; every key optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub image: Option<PathBuf>,
    pub prompt: Option<String>,
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub overlap_policy: Option<OverlapPolicy>,
    pub uncovered: Option<UncoveredPolicy>,
    pub on_empty_mask: Option<EmptyMaskPolicy>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub timeout_ms: Option<u64>,
    pub workers: Option<usize>,
    pub scale: Option<f64>,
    #[serde(default)]
    pub cache: CacheSection,
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    /// Values set in `over` replace those in `self`.
    pub fn overlay(self, over: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            image: over.image.or(self.image),
            prompt: over.prompt.or(self.prompt),
            backend: over.backend.or(self.backend),
            endpoint: over.endpoint.or(self.endpoint),
            overlap_policy: over.overlap_policy.or(self.overlap_policy),
            uncovered: over.uncovered.or(self.uncovered),
            on_empty_mask: over.on_empty_mask.or(self.on_empty_mask),
            seed: over.seed.or(self.seed),
            out_dir: over.out_dir.or(self.out_dir),
            timeout_ms: over.timeout_ms.or(self.timeout_ms),
            workers: over.workers.or(self.workers),
            scale: over.scale.or(self.scale),
            cache: CacheSection {
                capacity: over.cache.capacity.or(self.cache.capacity),
                enabled: over.cache.enabled.or(self.cache.enabled),
            },
        }
    }
}

/// Fully resolved, validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub image: PathBuf,
    pub prompt: String,
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub policy: CompositePolicy,
    pub on_empty_mask: EmptyMaskPolicy,
    pub cache_capacity: usize,
    pub cache_enabled: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub timeout_ms: u64,
    pub workers: usize,
    pub scale: f64,
}

impl PipelineConfig {
    /// Resolves a layer. `env_endpoint` is the fallback endpoint (normally
    /// `$MOSAIC_ENDPOINT`). `need_input` requires `image` and `prompt`.
    pub fn resolve(
        layer: ConfigLayer,
        env_endpoint: Option<String>,
        need_input: bool,
    ) -> Result<Self, ConfigError> {
        let image = layer.image.unwrap_or_default();
        let prompt = layer.prompt.unwrap_or_default();
        if need_input && image.as_os_str().is_empty() {
            return Err(ConfigError::Missing("image"));
        }
        if need_input && prompt.trim().is_empty() {
            return Err(ConfigError::Missing("prompt"));
        }
        let backend = layer.backend.unwrap_or_default();
        let endpoint = layer.endpoint.or(env_endpoint);
        if backend == BackendKind::Http && endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(ConfigError::Missing("endpoint"));
        }
        let cfg = PipelineConfig {
            image,
            prompt,
            backend,
            endpoint,
            policy: CompositePolicy {
                overlap: layer.overlap_policy.unwrap_or_default(),
                uncovered: layer.uncovered.unwrap_or_default(),
            },
            on_empty_mask: layer.on_empty_mask.unwrap_or_default(),
            cache_capacity: layer.cache.capacity.unwrap_or(DEFAULT_CAPACITY),
            cache_enabled: layer.cache.enabled.unwrap_or(true),
            seed: layer.seed.unwrap_or(0),
            out_dir: layer.out_dir.unwrap_or_else(|| PathBuf::from("mosaic-out")),
            timeout_ms: layer.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
            workers: layer.workers.unwrap_or(DEFAULT_WORKERS),
            scale: layer.scale.unwrap_or(1.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key, message: &str| {
            Err(ConfigError::Invalid {
                key,
                message: message.to_string(),
            })
        };
        if self.cache_capacity == 0 {
            return invalid("cache.capacity", "must be at least 1");
        }
        if self.workers == 0 {
            return invalid("workers", "must be at least 1");
        }
        if self.timeout_ms == 0 {
            return invalid("timeout_ms", "must be positive");
        }
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return invalid("scale", "must be a positive number");
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}
