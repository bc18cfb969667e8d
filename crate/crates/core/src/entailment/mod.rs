//! Entailment scoring behind a pluggable backend.
//!
//! [`Scorer`] wraps any [`EntailmentBackend`] with fixed-size, order
//! preserving batching, an optional process-lifetime cache and validation of
//! every judgment that crosses the backend boundary.

mod lookup;
mod remote;
pub mod wire;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lookup::LookupBackend;
pub use remote::RemoteBackend;

/// Tolerance on `entail + neutral + contradict == 1`.
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PremiseHypothesisPair {
    pub premise: String,
    pub hypothesis: String,
}

impl PremiseHypothesisPair {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        PremiseHypothesisPair {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
        }
    }

    pub fn is_valid(&self) -> bool {
        !self.premise.is_empty() && !self.hypothesis.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntailmentJudgment {
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

impl EntailmentJudgment {
    pub const NEUTRAL: EntailmentJudgment = EntailmentJudgment {
        entail: 0.0,
        neutral: 1.0,
        contradict: 0.0,
    };

    pub fn new(entail: f64, neutral: f64, contradict: f64) -> Self {
        EntailmentJudgment {
            entail,
            neutral,
            contradict,
        }
    }

    pub fn is_valid(&self) -> bool {
        let in_range = |p: f64| (0.0..=1.0).contains(&p);
        in_range(self.entail)
            && in_range(self.neutral)
            && in_range(self.contradict)
            && ((self.entail + self.neutral + self.contradict) - 1.0).abs() <= SUM_TOLERANCE
    }
}

impl fmt::Display for EntailmentJudgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.entail, self.neutral, self.contradict
        )
    }
}

/// Failure reported by a backend itself.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed backend response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EntailmentError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("pair {index} has an empty premise or hypothesis")]
    EmptyPair { index: usize },
    #[error("backend failed on the batch starting at pair {index}: {source}")]
    Backend {
        index: usize,
        #[source]
        source: BackendError,
    },
    #[error(
        "backend returned {got} judgments for {expected} pairs (batch starting at pair {index})"
    )]
    LengthMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid judgment {judgment} for pair {index}")]
    InvalidJudgment {
        index: usize,
        judgment: EntailmentJudgment,
    },
}

pub trait EntailmentBackend: Send + Sync {
    /// Scores every pair, returning judgments aligned with the input.
    fn score(
        &self,
        pairs: &[PremiseHypothesisPair],
    ) -> Result<Vec<EntailmentJudgment>, BackendError>;
}

impl<B: EntailmentBackend + ?Sized> EntailmentBackend for Arc<B> {
    fn score(
        &self,
        pairs: &[PremiseHypothesisPair],
    ) -> Result<Vec<EntailmentJudgment>, BackendError> {
        (**self).score(pairs)
    }
}

/// Returns the same judgment for every pair.
#[derive(Debug, Clone, Copy)]
pub struct ConstantBackend(pub EntailmentJudgment);

impl EntailmentBackend for ConstantBackend {
    fn score(
        &self,
        pairs: &[PremiseHypothesisPair],
    ) -> Result<Vec<EntailmentJudgment>, BackendError> {
        Ok(vec![self.0; pairs.len()])
    }
}

/// Counts pairs and calls forwarded to an inner backend.
pub struct CountingBackend<B> {
    inner: B,
    pairs: AtomicUsize,
    calls: AtomicUsize,
}

impl<B> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend {
            inner,
            pairs: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn pairs_scored(&self) -> usize {
        self.pairs.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: EntailmentBackend> EntailmentBackend for CountingBackend<B> {
    fn score(
        &self,
        pairs: &[PremiseHypothesisPair],
    ) -> Result<Vec<EntailmentJudgment>, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.pairs.fetch_add(pairs.len(), Ordering::SeqCst);
        self.inner.score(pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendKind {
    Remote { endpoint: String },
    Lookup { table: PathBuf },
    Constant { judgment: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_cache")]
    pub cache: bool,
}

fn default_batch_size() -> usize {
    32
}

fn default_cache() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("I/O error reading {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid backend config: {0}")]
    Invalid(String),
}

impl BackendConfig {
    pub fn constant(j: EntailmentJudgment) -> Self {
        BackendConfig {
            kind: BackendKind::Constant {
                judgment: [j.entail, j.neutral, j.contradict],
            },
            batch_size: default_batch_size(),
            cache: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be positive".into()));
        }
        if let BackendKind::Constant {
            judgment: [e, n, c],
        } = self.kind
        {
            let j = EntailmentJudgment::new(e, n, c);
            if !j.is_valid() {
                return Err(ConfigError::Invalid(format!(
                    "constant judgment {j} is not a distribution"
                )));
            }
        }
        if let BackendKind::Remote { endpoint } = &self.kind {
            if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
                return Err(ConfigError::Invalid(format!(
                    "endpoint `{endpoint}` is not an http(s) url"
                )));
            }
        }
        Ok(())
    }

    /// Reads a JSON config. Relative lookup-table paths resolve against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg: BackendConfig =
            serde_json::from_str(&raw).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let BackendKind::Lookup { table } = &mut cfg.kind {
            if table.is_relative() {
                if let Some(dir) = path.parent() {
                    *table = dir.join(&*table);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn build_backend(&self) -> Result<Arc<dyn EntailmentBackend>, ConfigError> {
        self.validate()?;
        Ok(match &self.kind {
            BackendKind::Remote { endpoint } => Arc::new(RemoteBackend::new(endpoint.clone())),
            BackendKind::Lookup { table } => {
                Arc::new(LookupBackend::load(table).map_err(|e| ConfigError::Io {
                    path: table.display().to_string(),
                    message: e.to_string(),
                })?)
            }
            BackendKind::Constant {
                judgment: [e, n, c],
            } => Arc::new(ConstantBackend(EntailmentJudgment::new(*e, *n, *c))),
        })
    }

    pub fn build_scorer(&self) -> Result<Scorer, ConfigError> {
        Ok(Scorer::new(
            self.build_backend()?,
            self.batch_size,
            self.cache,
        ))
    }
}

/// Batching, caching and validation in front of a backend.
pub struct Scorer {
    backend: Arc<dyn EntailmentBackend>,
    batch_size: usize,
    cache: Option<RwLock<HashMap<PremiseHypothesisPair, EntailmentJudgment>>>,
}

impl Scorer {
    pub fn new(backend: Arc<dyn EntailmentBackend>, batch_size: usize, cache: bool) -> Self {
        Scorer {
            backend,
            batch_size: batch_size.max(1),
            cache: cache.then(|| RwLock::new(HashMap::new())),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn backend(&self) -> &Arc<dyn EntailmentBackend> {
        &self.backend
    }

    pub fn cached_pairs(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.read().len())
    }

    /// Scores `pairs`, aligned index for index. Either every judgment is
    /// returned or an error naming the first offending pair.
    pub fn score_batch(
        &self,
        pairs: &[PremiseHypothesisPair],
    ) -> Result<Vec<EntailmentJudgment>, EntailmentError> {
        if pairs.is_empty() {
            return Err(EntailmentError::EmptyBatch);
        }
        if let Some(index) = pairs.iter().position(|p| !p.is_valid()) {
            return Err(EntailmentError::EmptyPair { index });
        }
        let Some(cache) = &self.cache else {
            let indices: Vec<usize> = (0..pairs.len()).collect();
            return self.fetch(pairs, &indices);
        };

        let mut out: Vec<Option<EntailmentJudgment>> = {
            let guard = cache.read();
            pairs.iter().map(|p| guard.get(p).copied()).collect()
        };
        // Distinct misses, each remembered by its first input index.
        let mut first_seen: HashMap<&PremiseHypothesisPair, usize> = HashMap::new();
        let mut misses = Vec::new();
        for (i, p) in pairs.iter().enumerate() {
            if out[i].is_none() && !first_seen.contains_key(p) {
                first_seen.insert(p, i);
                misses.push(i);
            }
        }
        if !misses.is_empty() {
            let miss_pairs: Vec<PremiseHypothesisPair> =
                misses.iter().map(|&i| pairs[i].clone()).collect();
            let fetched = self.fetch(&miss_pairs, &misses)?;
            let mut guard = cache.write();
            for (&i, j) in misses.iter().zip(&fetched) {
                guard.insert(pairs[i].clone(), *j);
            }
            for (i, p) in pairs.iter().enumerate() {
                if out[i].is_none() {
                    out[i] = guard.get(p).copied();
                }
            }
        }
        Ok(out
            .into_iter()
            .map(|j| j.expect("every pair resolved"))
            .collect())
    }

    /// Sends `pairs` in fixed-size chunks; `origin[k]` is the caller-visible
    /// index of `pairs[k]` used in error reports.
    fn fetch(
        &self,
        pairs: &[PremiseHypothesisPair],
        origin: &[usize],
    ) -> Result<Vec<EntailmentJudgment>, EntailmentError> {
        let mut out = Vec::with_capacity(pairs.len());
        for (chunk_no, chunk) in pairs.chunks(self.batch_size).enumerate() {
            let base = chunk_no * self.batch_size;
            let judgments =
                self.backend
                    .score(chunk)
                    .map_err(|source| EntailmentError::Backend {
                        index: origin[base],
                        source,
                    })?;
            if judgments.len() != chunk.len() {
                return Err(EntailmentError::LengthMismatch {
                    index: origin[base],
                    expected: chunk.len(),
                    got: judgments.len(),
                });
            }
            for (k, j) in judgments.iter().enumerate() {
                if !j.is_valid() {
                    return Err(EntailmentError::InvalidJudgment {
                        index: origin[base + k],
                        judgment: *j,
                    });
                }
            }
            out.extend(judgments);
        }
        Ok(out)
    }
}
