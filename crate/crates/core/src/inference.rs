//! Candidate → role decision: verbalize the allowed roles, score every
//! hypothesis against the trigger sentence, take each role's best template,
//! pick the best role and apply the threshold.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{ConstraintError, ConstraintTable};
use crate::corpus::{generate_candidates, Candidate, Document, Label};
use crate::entailment::{EntailmentError, EntailmentJudgment, PremiseHypothesisPair, Scorer};
use crate::eval::{score_f1, Decision, EvalGold, EvalResult};
use crate::exec::{self, Execution};
use crate::templates::{EventContext, Hypothesis, TemplateError, TemplateLibrary};

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("document `{doc}` has no {kind} `{id}`")]
    UnknownReference {
        doc: String,
        kind: &'static str,
        id: String,
    },
    #[error("event `{event}` in document `{doc}` has no trigger sentence")]
    NoPremise { doc: String, event: String },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("role `{role}` is allowed for `{subtype}` but has no applicable templates")]
    MissingTemplates { role: String, subtype: String },
    #[error(transparent)]
    Entailment(#[from] EntailmentError),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

/// Per-role aggregation over that role's templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    #[default]
    Max,
}

/// Text used as the premise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PremiseScope {
    #[default]
    TriggerSentence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub threshold: f64,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub premise_scope: PremiseScope,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            threshold: 0.5,
            aggregation: Aggregation::Max,
            premise_scope: PremiseScope::TriggerSentence,
        }
    }
}

impl InferenceConfig {
    pub fn with_threshold(threshold: f64) -> Result<Self, InferenceError> {
        let cfg = InferenceConfig {
            threshold,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if (0.0..=1.0).contains(&self.threshold) {
            Ok(())
        } else {
            Err(InferenceError::InvalidThreshold(self.threshold))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateScore {
    pub role: String,
    pub template_id: String,
    pub hypothesis: String,
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

/// One prediction; serialized as a prediction-dump line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolePrediction {
    #[serde(rename = "doc")]
    pub document_id: String,
    #[serde(rename = "event")]
    pub event_id: String,
    #[serde(rename = "entity")]
    pub entity_id: String,
    pub predicted: Label,
    /// Best per-role score among allowed roles (0 when none were allowed).
    #[serde(rename = "score")]
    pub winning_role_score: f64,
    #[serde(rename = "scores")]
    pub per_template_scores: Vec<TemplateScore>,
}

impl RolePrediction {
    pub fn decision(&self) -> Decision {
        Decision {
            document_id: self.document_id.clone(),
            event_id: self.event_id.clone(),
            entity_id: self.entity_id.clone(),
            predicted: self.predicted.clone(),
        }
    }

    /// Best role and its aggregated score, ties going to the
    /// lexicographically smallest role.
    pub fn best_role(&self) -> Option<(&str, f64)> {
        best_role(&self.per_template_scores)
    }

    /// The same prediction under another threshold.
    pub fn rethreshold(&self, threshold: f64) -> RolePrediction {
        let mut p = self.clone();
        p.predicted = match self.best_role() {
            Some((role, score)) if score >= threshold => Label::Role(role.to_string()),
            _ => Label::Negative,
        };
        p
    }
}

fn best_role(scores: &[TemplateScore]) -> Option<(&str, f64)> {
    let mut per_role: BTreeMap<&str, f64> = BTreeMap::new();
    for s in scores {
        let e = per_role.entry(s.role.as_str()).or_insert(f64::NEG_INFINITY);
        if s.entail > *e {
            *e = s.entail;
        }
    }
    // BTreeMap iterates roles in order, so a strict comparison keeps the
    // smallest name on ties.
    let mut best: Option<(&str, f64)> = None;
    for (role, score) in per_role {
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((role, score));
        }
    }
    best
}

/// Premise and hypotheses for one candidate, before scoring.
#[derive(Debug, Clone)]
pub struct CandidatePlan {
    pub candidate: Candidate,
    pub premise: String,
    pub allowed_roles: BTreeSet<String>,
    pub hypotheses: Vec<Hypothesis>,
}

pub fn plan_candidate(
    candidate: &Candidate,
    doc: &Document,
    lib: &TemplateLibrary,
    table: &ConstraintTable,
) -> Result<CandidatePlan, InferenceError> {
    let unknown = |kind, id: &str| InferenceError::UnknownReference {
        doc: doc.id.clone(),
        kind,
        id: id.to_string(),
    };
    if candidate.document_id != doc.id {
        return Err(unknown("document", &candidate.document_id));
    }
    let event = doc
        .event(&candidate.event_id)
        .ok_or_else(|| unknown("event", &candidate.event_id))?;
    let entity = doc
        .entity(&candidate.entity_id)
        .ok_or_else(|| unknown("entity", &candidate.entity_id))?;
    let premise = doc
        .trigger_sentence(event)
        .ok_or_else(|| InferenceError::NoPremise {
            doc: doc.id.clone(),
            event: event.id.clone(),
        })?;
    let key = event.subtype_key();
    let allowed_roles = table.allowed_roles(&key, &entity.entity_type)?;
    for role in &allowed_roles {
        if lib.applicable(role, &key).next().is_none() {
            return Err(InferenceError::MissingTemplates {
                role: role.clone(),
                subtype: key.clone(),
            });
        }
    }
    let ctx = EventContext::new(&event.trigger_surface, &event.event_type, &key);
    let hypotheses = lib.verbalize_role_set(&ctx, &entity.surface, &allowed_roles)?;
    Ok(CandidatePlan {
        candidate: candidate.clone(),
        premise: premise.to_string(),
        allowed_roles,
        hypotheses,
    })
}

impl CandidatePlan {
    pub fn pairs(&self) -> impl Iterator<Item = PremiseHypothesisPair> + '_ {
        self.hypotheses
            .iter()
            .map(|h| PremiseHypothesisPair::new(self.premise.clone(), h.hypothesis.clone()))
    }

    /// Turns judgments aligned with `hypotheses` into a prediction.
    pub fn decide(
        &self,
        judgments: &[EntailmentJudgment],
        cfg: &InferenceConfig,
    ) -> RolePrediction {
        debug_assert_eq!(judgments.len(), self.hypotheses.len());
        let per_template_scores: Vec<TemplateScore> = self
            .hypotheses
            .iter()
            .zip(judgments)
            .map(|(h, j)| TemplateScore {
                role: h.role.clone(),
                template_id: h.template_id.clone(),
                hypothesis: h.hypothesis.clone(),
                entail: j.entail,
                neutral: j.neutral,
                contradict: j.contradict,
            })
            .collect();
        let (predicted, score) = match best_role(&per_template_scores) {
            Some((role, score)) if score >= cfg.threshold => (Label::Role(role.to_string()), score),
            Some((_, score)) => (Label::Negative, score),
            None => (Label::Negative, 0.0),
        };
        RolePrediction {
            document_id: self.candidate.document_id.clone(),
            event_id: self.candidate.event_id.clone(),
            entity_id: self.candidate.entity_id.clone(),
            predicted,
            winning_role_score: score,
            per_template_scores,
        }
    }
}

/// Predicts the role of a single candidate. Candidates with no allowed role
/// are discarded as NEGATIVE without calling the backend.
pub fn predict_role(
    candidate: &Candidate,
    doc: &Document,
    lib: &TemplateLibrary,
    table: &ConstraintTable,
    scorer: &Scorer,
    cfg: &InferenceConfig,
) -> Result<RolePrediction, InferenceError> {
    cfg.validate()?;
    let plan = plan_candidate(candidate, doc, lib, table)?;
    let judgments = if plan.hypotheses.is_empty() {
        Vec::new()
    } else {
        scorer.score_batch(&plan.pairs().collect::<Vec<_>>())?
    };
    Ok(plan.decide(&judgments, cfg))
}

/// Predicts every candidate of a document, scoring all of its hypotheses in
/// one batched call.
pub fn predict_document(
    doc: &Document,
    lib: &TemplateLibrary,
    table: &ConstraintTable,
    scorer: &Scorer,
    cfg: &InferenceConfig,
) -> Result<Vec<RolePrediction>, InferenceError> {
    cfg.validate()?;
    let plans = generate_candidates(doc)
        .iter()
        .map(|c| plan_candidate(c, doc, lib, table))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<PremiseHypothesisPair> = plans.iter().flat_map(|p| p.pairs()).collect();
    let judgments = if pairs.is_empty() {
        Vec::new()
    } else {
        scorer.score_batch(&pairs)?
    };
    let mut offset = 0;
    Ok(plans
        .iter()
        .map(|plan| {
            let n = plan.hypotheses.len();
            let pred = plan.decide(&judgments[offset..offset + n], cfg);
            offset += n;
            pred
        })
        .collect())
}

/// Predicts a whole corpus, fanning documents out per `exec`. Output order is
/// corpus order regardless of execution mode.
pub fn predict_corpus(
    docs: &[Document],
    lib: &TemplateLibrary,
    table: &ConstraintTable,
    scorer: &Scorer,
    cfg: &InferenceConfig,
    exec: Execution,
) -> Result<Vec<RolePrediction>, InferenceError> {
    let per_doc = exec::try_map(exec, docs, |d| predict_document(d, lib, table, scorer, cfg))?;
    Ok(per_doc.into_iter().flatten().collect())
}

/// F1 at each threshold, re-deciding stored scores without rescoring.
pub fn threshold_sweep(
    predictions: &[RolePrediction],
    gold: &EvalGold,
    thresholds: &[f64],
) -> Result<Vec<(f64, EvalResult)>, crate::eval::EvalError> {
    thresholds
        .iter()
        .map(|&t| {
            let decisions: Vec<Decision> = predictions
                .iter()
                .map(|p| p.rethreshold(t).decision())
                .collect();
            score_f1(gold, &decisions).map(|r| (t, r))
        })
        .collect()
}
