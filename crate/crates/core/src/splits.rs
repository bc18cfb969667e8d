//! Few-shot training splits sampled by event mention.
//!
//! Events are shuffled once per seed and every fraction takes a prefix of
//! that order, so smaller splits are always contained in larger ones.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{generate_candidates, Candidate, Document, Label};

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("no fractions given")]
    Empty,
    #[error("fraction {0} outside (0, 1]")]
    OutOfRange(f64),
    #[error("fractions must be strictly ascending ({0} after {1})")]
    NotAscending(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: Vec<f64>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(fractions: Vec<f64>, seed: u64) -> Result<Self, SplitError> {
        let spec = SplitSpec { fractions, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        if self.fractions.is_empty() {
            return Err(SplitError::Empty);
        }
        for &f in &self.fractions {
            if !(f > 0.0 && f <= 1.0) {
                return Err(SplitError::OutOfRange(f));
            }
        }
        for w in self.fractions.windows(2) {
            if w[1] <= w[0] {
                return Err(SplitError::NotAscending(w[1], w[0]));
            }
        }
        Ok(())
    }
}

/// All candidates of one event mention; the sampling unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventGroup {
    pub document_id: String,
    pub event_id: String,
    pub candidates: Vec<Candidate>,
}

pub fn group_by_event(docs: &[Document]) -> Vec<EventGroup> {
    let mut groups = Vec::new();
    for doc in docs {
        let cands = generate_candidates(doc);
        for ev in &doc.events {
            groups.push(EventGroup {
                document_id: doc.id.clone(),
                event_id: ev.id.clone(),
                candidates: cands
                    .iter()
                    .filter(|c| c.event_id == ev.id)
                    .cloned()
                    .collect(),
            });
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub fraction: f64,
    /// Selected `(document, event)` pairs in corpus order.
    pub events: Vec<(String, String)>,
    /// Their candidates in corpus order.
    pub candidates: Vec<Candidate>,
}

impl Split {
    pub fn contains_event(&self, doc: &str, event: &str) -> bool {
        self.events.iter().any(|(d, e)| d == doc && e == event)
    }
}

/// Number of events a fraction selects out of `n`.
pub fn events_for_fraction(fraction: f64, n: usize) -> usize {
    if fraction >= 1.0 {
        n
    } else {
        ((fraction * n as f64).round() as usize).min(n)
    }
}

pub fn make_splits(groups: &[EventGroup], spec: &SplitSpec) -> Result<Vec<Split>, SplitError> {
    spec.validate()?;
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    Ok(spec
        .fractions
        .iter()
        .map(|&fraction| {
            let k = events_for_fraction(fraction, groups.len());
            if k == 0 && !groups.is_empty() {
                log::warn!(
                    "fraction {fraction} selects no events out of {}",
                    groups.len()
                );
            }
            let mut chosen: Vec<usize> = order[..k].to_vec();
            chosen.sort_unstable();
            Split {
                fraction,
                events: chosen
                    .iter()
                    .map(|&i| (groups[i].document_id.clone(), groups[i].event_id.clone()))
                    .collect(),
                candidates: chosen
                    .iter()
                    .flat_map(|&i| groups[i].candidates.iter().cloned())
                    .collect(),
            }
        })
        .collect())
}

/// Restricts documents to the events a split selected. Documents that lose
/// every event are dropped; documents that never had one are kept.
pub fn filter_documents(docs: &[Document], split: &Split) -> Vec<Document> {
    let keep: HashSet<(&str, &str)> = split
        .events
        .iter()
        .map(|(d, e)| (d.as_str(), e.as_str()))
        .collect();
    docs.iter()
        .filter_map(|doc| {
            let events: Vec<_> = doc
                .events
                .iter()
                .filter(|e| keep.contains(&(doc.id.as_str(), e.id.as_str())))
                .cloned()
                .collect();
            (!events.is_empty() || doc.events.is_empty()).then(|| Document {
                events,
                ..doc.clone()
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub total: usize,
    pub positives: usize,
    pub negatives: usize,
    pub per_role: BTreeMap<String, usize>,
    /// Mean positives over every schema role, zero-count roles included.
    pub mean_positives_per_role: f64,
}

pub fn split_stats(candidates: &[Candidate], schema_roles: &BTreeSet<String>) -> SplitStats {
    let mut per_role: BTreeMap<String, usize> =
        schema_roles.iter().map(|r| (r.clone(), 0)).collect();
    let mut positives = 0;
    for c in candidates {
        if let Label::Role(r) = &c.gold_role {
            positives += 1;
            *per_role.entry(r.clone()).or_default() += 1;
        }
    }
    let mean = if per_role.is_empty() {
        0.0
    } else {
        per_role.values().sum::<usize>() as f64 / per_role.len() as f64
    };
    SplitStats {
        total: candidates.len(),
        positives,
        negatives: candidates.len() - positives,
        per_role,
        mean_positives_per_role: mean,
    }
}
