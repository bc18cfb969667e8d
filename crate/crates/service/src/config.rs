//! Service configuration: a JSON file plus `ARGNLI_*` environment overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use argnli_core::constraints::ConstraintError;
use argnli_core::corpus::{load_corpus, CorpusError};
use argnli_core::entailment::{BackendConfig, ConfigError, EntailmentJudgment, RemoteBackend};
use argnli_core::templates::TemplateError;
use argnli_core::{ConstraintTable, InferenceConfig, Scorer, TemplateLibrary};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "ARGNLI_";

#[derive(Debug, Error)]
pub enum ServiceConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid value for {key}: {message}")]
    Invalid { key: String, message: String },
    #[error(transparent)]
    Backend(#[from] ConfigError),
    #[error("library: {0}")]
    Library(#[from] TemplateError),
    #[error("constraints: {0}")]
    Constraints(#[from] ConstraintError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Backend config file; takes precedence over `backend_endpoint`.
    #[serde(default)]
    pub backend: Option<PathBuf>,
    #[serde(default)]
    pub backend_endpoint: Option<String>,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Library file read at startup and rewritten on every accepted PUT.
    #[serde(default)]
    pub library: Option<PathBuf>,
    #[serde(default)]
    pub constraints: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_threshold() -> f64 {
    InferenceConfig::default().threshold
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: default_listen(),
            backend: None,
            backend_endpoint: None,
            corpus: None,
            library: None,
            constraints: None,
            threshold: default_threshold(),
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ServiceConfigError> {
        let path = path.as_ref();
        let read_err = |message: String| ServiceConfigError::Read {
            path: path.display().to_string(),
            message,
        };
        let raw = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        serde_json::from_str(&raw).map_err(|e| read_err(e.to_string()))
    }

    /// Applies `ARGNLI_LISTEN`, `ARGNLI_BACKEND`, `ARGNLI_BACKEND_ENDPOINT`,
    /// `ARGNLI_CORPUS`, `ARGNLI_LIBRARY`, `ARGNLI_CONSTRAINTS` and
    /// `ARGNLI_THRESHOLD` as read through `var`.
    pub fn apply_env(
        &mut self,
        var: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ServiceConfigError> {
        let get = |key: &str| var(&format!("{ENV_PREFIX}{key}")).filter(|v| !v.is_empty());
        if let Some(v) = get("LISTEN") {
            self.listen = v;
        }
        if let Some(v) = get("BACKEND") {
            self.backend = Some(v.into());
        }
        if let Some(v) = get("BACKEND_ENDPOINT") {
            self.backend_endpoint = Some(v);
        }
        if let Some(v) = get("CORPUS") {
            self.corpus = Some(v.into());
        }
        if let Some(v) = get("LIBRARY") {
            self.library = Some(v.into());
        }
        if let Some(v) = get("CONSTRAINTS") {
            self.constraints = Some(v.into());
        }
        if let Some(v) = get("THRESHOLD") {
            self.threshold = v.parse().map_err(|e| ServiceConfigError::Invalid {
                key: format!("{ENV_PREFIX}THRESHOLD"),
                message: format!("{e}"),
            })?;
        }
        Ok(())
    }

    /// File (if any) overlaid with the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn inference(&self) -> Result<InferenceConfig, ServiceConfigError> {
        InferenceConfig::with_threshold(self.threshold).map_err(|e| ServiceConfigError::Invalid {
            key: "threshold".into(),
            message: e.to_string(),
        })
    }

    pub fn build_scorer(&self) -> Result<Scorer, ServiceConfigError> {
        if let Some(path) = &self.backend {
            return Ok(BackendConfig::load(path)?.build_scorer()?);
        }
        if let Some(endpoint) = &self.backend_endpoint {
            return Ok(Scorer::new(
                Arc::new(RemoteBackend::new(endpoint.clone())),
                32,
                true,
            ));
        }
        log::warn!("no entailment backend configured; every hypothesis scores as neutral");
        Ok(BackendConfig::constant(EntailmentJudgment::NEUTRAL).build_scorer()?)
    }

    pub fn load_library(&self) -> Result<TemplateLibrary, ServiceConfigError> {
        Ok(match &self.library {
            Some(p) => TemplateLibrary::load(p)?,
            None => TemplateLibrary::ace_main(),
        })
    }

    pub fn load_constraints(&self) -> Result<ConstraintTable, ServiceConfigError> {
        Ok(match &self.constraints {
            Some(p) => ConstraintTable::load(p)?,
            None => ConstraintTable::ace(),
        })
    }

    pub fn load_corpus(&self) -> Result<Vec<argnli_core::Document>, ServiceConfigError> {
        Ok(match &self.corpus {
            Some(p) => load_corpus(p)?,
            None => Vec::new(),
        })
    }
}
