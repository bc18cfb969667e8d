//! Micro F1, Coref-F1, few-shot curve AUC and developer comparisons.
//!
//! Scoring works on gold argument links `(doc, event, entity, role)`. Gold
//! links that no candidate can carry (mention outside the trigger sentence,
//! or a second role for the same pair) stay in the gold set and therefore
//! count as false negatives.

mod auc;
pub mod report;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    coref_index, generate_candidates, gold_arguments, Candidate, Document, GoldArgument, Label,
};

pub use auc::{auc, parse_curve, CurvePoint};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{gold} gold candidates but {predicted} predictions")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("prediction {index} is for {got}, expected {expected}")]
    Misaligned {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("AUC needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("duplicate fraction {0}")]
    DuplicateFraction(f64),
    #[error("fractions must be ascending ({0} after {1})")]
    Unsorted(f64, f64),
    #[error("fraction {0} outside [0, 100]")]
    FractionOutOfRange(f64),
    #[error("curve line {line}: {message}")]
    CurveParse { line: usize, message: String },
}

/// A role decision for one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    #[serde(rename = "doc")]
    pub document_id: String,
    #[serde(rename = "event")]
    pub event_id: String,
    #[serde(rename = "entity")]
    pub entity_id: String,
    pub predicted: Label,
}

/// Gold side of an evaluation.
#[derive(Debug, Clone, Default)]
pub struct EvalGold {
    /// Candidates the predictions must align with, index for index.
    pub candidates: Vec<Candidate>,
    /// Gold links no candidate carries.
    pub unreachable: Vec<GoldArgument>,
    /// `(doc, entity) → chain id`; missing mentions are singletons.
    pub chains: HashMap<(String, String), usize>,
}

type Link = (String, String, String, String);

impl EvalGold {
    pub fn from_documents(docs: &[Document]) -> Self {
        let mut gold = EvalGold::default();
        for doc in docs {
            gold.candidates.extend(generate_candidates(doc));
            gold.unreachable
                .extend(gold_arguments(doc).into_iter().filter(|g| !g.reachable));
            for (entity, chain) in coref_index(doc) {
                gold.chains.insert((doc.id.clone(), entity), chain);
            }
        }
        gold
    }

    /// All gold links `(doc, event, entity, role)`.
    pub fn links(&self) -> Vec<Link> {
        let mut out: Vec<Link> = self
            .candidates
            .iter()
            .filter_map(|c| {
                c.gold_role.role().map(|r| {
                    (
                        c.document_id.clone(),
                        c.event_id.clone(),
                        c.entity_id.clone(),
                        r.to_string(),
                    )
                })
            })
            .collect();
        out.extend(self.unreachable.iter().map(|g| {
            (
                g.document_id.clone(),
                g.event_id.clone(),
                g.entity_id.clone(),
                g.role.clone(),
            )
        }));
        out
    }

    fn check_alignment(&self, predictions: &[Decision]) -> Result<(), EvalError> {
        if predictions.len() != self.candidates.len() {
            return Err(EvalError::LengthMismatch {
                gold: self.candidates.len(),
                predicted: predictions.len(),
            });
        }
        for (i, (c, p)) in self.candidates.iter().zip(predictions).enumerate() {
            if (
                c.document_id.as_str(),
                c.event_id.as_str(),
                c.entity_id.as_str(),
            ) != (
                p.document_id.as_str(),
                p.event_id.as_str(),
                p.entity_id.as_str(),
            ) {
                return Err(EvalError::Misaligned {
                    index: i,
                    expected: format!("{}/{}/{}", c.document_id, c.event_id, c.entity_id),
                    got: format!("{}/{}/{}", p.document_id, p.event_id, p.entity_id),
                });
            }
        }
        Ok(())
    }

    fn chain(&self, doc: &str, entity: &str) -> ChainKey {
        match self.chains.get(&(doc.to_string(), entity.to_string())) {
            Some(c) => ChainKey::Chain(*c),
            None => ChainKey::Mention(entity.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ChainKey {
    Chain(usize),
    Mention(String),
}

fn predicted_links(predictions: &[Decision]) -> Vec<Link> {
    let mut seen = HashSet::new();
    predictions
        .iter()
        .filter_map(|p| {
            p.predicted.role().map(|r| {
                (
                    p.document_id.clone(),
                    p.event_id.clone(),
                    p.entity_id.clone(),
                    r.to_string(),
                )
            })
        })
        .filter(|l| seen.insert(l.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub per_role: BTreeMap<String, RoleCounts>,
}

pub fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl EvalResult {
    fn from_counts(
        correct_predictions: usize,
        predicted: usize,
        per_role: BTreeMap<String, RoleCounts>,
    ) -> Self {
        let tp: usize = per_role.values().map(|c| c.tp).sum();
        let fp: usize = per_role.values().map(|c| c.fp).sum();
        let fn_: usize = per_role.values().map(|c| c.fn_).sum();
        let precision = ratio(correct_predictions, predicted);
        let recall = ratio(tp, tp + fn_);
        EvalResult {
            precision,
            recall,
            f1: f1_score(precision, recall),
            tp,
            fp,
            fn_,
            per_role,
        }
    }
}

/// Micro-averaged precision, recall and F1 over argument links.
pub fn score_f1(gold: &EvalGold, predictions: &[Decision]) -> Result<EvalResult, EvalError> {
    gold.check_alignment(predictions)?;
    let gold_links = gold.links();
    let gold_set: HashSet<&Link> = gold_links.iter().collect();
    let pred_links = predicted_links(predictions);
    let pred_set: HashSet<&Link> = pred_links.iter().collect();

    let mut per_role: BTreeMap<String, RoleCounts> = BTreeMap::new();
    for l in &gold_links {
        let c = per_role.entry(l.3.clone()).or_default();
        if pred_set.contains(l) {
            c.tp += 1;
        } else {
            c.fn_ += 1;
        }
    }
    let mut correct = 0;
    for l in &pred_links {
        if gold_set.contains(l) {
            correct += 1;
        } else {
            per_role.entry(l.3.clone()).or_default().fp += 1;
        }
    }
    for c in per_role.values_mut() {
        c.recall = ratio(c.tp, c.tp + c.fn_);
    }
    Ok(EvalResult::from_counts(correct, pred_links.len(), per_role))
}

/// Coref-aware scoring: a gold link is recovered when any mention of its
/// coreference chain is predicted with the gold role for the same event, and
/// a prediction is correct when some chain-mate carries that gold role.
///
/// `tp`/`fn` count gold links, `fp` counts incorrect predictions; precision
/// is correct predictions over all predictions.
pub fn score_coref_f1(gold: &EvalGold, predictions: &[Decision]) -> Result<EvalResult, EvalError> {
    gold.check_alignment(predictions)?;
    let chain_link = |l: &Link| {
        (
            l.0.clone(),
            l.1.clone(),
            gold.chain(&l.0, &l.2),
            l.3.clone(),
        )
    };
    let gold_links = gold.links();
    let gold_chains: HashSet<_> = gold_links.iter().map(chain_link).collect();
    let pred_links = predicted_links(predictions);
    let pred_chains: HashSet<_> = pred_links.iter().map(chain_link).collect();

    let mut per_role: BTreeMap<String, RoleCounts> = BTreeMap::new();
    for l in &gold_links {
        let c = per_role.entry(l.3.clone()).or_default();
        if pred_chains.contains(&chain_link(l)) {
            c.tp += 1;
        } else {
            c.fn_ += 1;
        }
    }
    let mut correct = 0;
    for l in &pred_links {
        if gold_chains.contains(&chain_link(l)) {
            correct += 1;
        } else {
            per_role.entry(l.3.clone()).or_default().fp += 1;
        }
    }
    for c in per_role.values_mut() {
        c.recall = ratio(c.tp, c.tp + c.fn_);
    }
    Ok(EvalResult::from_counts(correct, pred_links.len(), per_role))
}

/// Per-role recall split between two systems.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RecallDiff {
    /// Gold links of the role.
    pub support: usize,
    pub a_only_recall: f64,
    pub b_only_recall: f64,
    pub overlap_recall: f64,
    /// Neither system recovered anything the other missed.
    pub same: bool,
}

pub fn recall_diff(
    a: &[Decision],
    b: &[Decision],
    gold: &EvalGold,
) -> Result<BTreeMap<String, RecallDiff>, EvalError> {
    gold.check_alignment(a)?;
    gold.check_alignment(b)?;
    let a_links: HashSet<Link> = predicted_links(a).into_iter().collect();
    let b_links: HashSet<Link> = predicted_links(b).into_iter().collect();
    let mut counts: BTreeMap<String, (usize, usize, usize, usize)> = BTreeMap::new();
    for l in gold.links() {
        let e = counts.entry(l.3.clone()).or_default();
        e.0 += 1;
        match (a_links.contains(&l), b_links.contains(&l)) {
            (true, false) => e.1 += 1,
            (false, true) => e.2 += 1,
            (true, true) => e.3 += 1,
            (false, false) => {}
        }
    }
    Ok(counts
        .into_iter()
        .map(|(role, (support, a_only, b_only, both))| {
            (
                role,
                RecallDiff {
                    support,
                    a_only_recall: ratio(a_only, support),
                    b_only_recall: ratio(b_only, support),
                    overlap_recall: ratio(both, support),
                    same: a_only == 0 && b_only == 0,
                },
            )
        })
        .collect())
}
