//! Turns an annotated corpus into premise/hypothesis/label training data.
//!
//! Positive candidates yield entailment examples from their gold role's
//! templates and neutral examples from other roles' templates. Negative
//! candidates yield contradiction examples from any template. Each candidate
//! draws from its own RNG, seeded from the global seed and the candidate's
//! identity, so output does not depend on how work is scheduled.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constraints::{ConstraintError, ConstraintTable};
use crate::corpus::{generate_candidates, Candidate, Document, Label};
use crate::exec::{self, Execution};
use crate::templates::{EventContext, Template, TemplateError, TemplateLibrary};

#[derive(Debug, Error)]
pub enum RecastError {
    #[error("document `{doc}` has no {kind} `{id}`")]
    UnknownReference {
        doc: String,
        kind: &'static str,
        id: String,
    },
    #[error("role `{role}` has no templates for `{subtype}`")]
    MissingTemplates { role: String, subtype: String },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest needs at least one source stage")]
    NoSources,
    #[error("duplicate stage name `{0}`")]
    DuplicateStage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n_entail: usize,
    pub n_neutral: usize,
    pub n_contradict: usize,
    /// Skip negatives whose entity type fits no role of the event.
    pub constrained: bool,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n_entail: 2,
            n_neutral: 5,
            n_contradict: 5,
            constrained: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Neutral => "neutral",
            NliLabel::Contradiction => "contradiction",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub doc: String,
    pub event: String,
    pub entity: String,
    pub gold_role: Label,
    pub template_id: String,
    pub template_role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliExample {
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub meta: Provenance,
}

/// Per-candidate RNG from the global seed and the candidate identity.
pub fn candidate_rng(seed: u64, candidate: &Candidate) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [
        &candidate.document_id,
        &candidate.event_id,
        &candidate.entity_id,
    ] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn draw<'a>(rng: &mut ChaCha8Rng, pool: &[&'a Template], n: usize) -> Vec<&'a Template> {
    let amount = n.min(pool.len());
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), amount).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i]).collect()
}

pub fn recast_candidate(
    candidate: &Candidate,
    doc: &Document,
    lib: &TemplateLibrary,
    table: &ConstraintTable,
    cfg: &SamplingConfig,
    source: &str,
) -> Result<Vec<NliExample>, RecastError> {
    let unknown = |kind, id: &str| RecastError::UnknownReference {
        doc: doc.id.clone(),
        kind,
        id: id.to_string(),
    };
    let event = doc
        .event(&candidate.event_id)
        .ok_or_else(|| unknown("event", &candidate.event_id))?;
    let entity = doc
        .entity(&candidate.entity_id)
        .ok_or_else(|| unknown("entity", &candidate.entity_id))?;
    let premise = doc
        .trigger_sentence(event)
        .ok_or_else(|| unknown("trigger sentence for", &event.id))?;
    let key = event.subtype_key();
    let mut rng = candidate_rng(cfg.seed, candidate);

    let chosen: Vec<(NliLabel, &Template)> = match &candidate.gold_role {
        Label::Role(gold) => {
            let own: Vec<&Template> = lib.applicable(gold, &key).collect();
            if own.is_empty() {
                return Err(RecastError::MissingTemplates {
                    role: gold.clone(),
                    subtype: key,
                });
            }
            let others: Vec<&Template> = lib
                .all_templates()
                .filter(|t| &t.role != gold && t.applies_to(&key))
                .collect();
            let mut out: Vec<_> = draw(&mut rng, &own, cfg.n_entail)
                .into_iter()
                .map(|t| (NliLabel::Entailment, t))
                .collect();
            out.extend(
                draw(&mut rng, &others, cfg.n_neutral)
                    .into_iter()
                    .map(|t| (NliLabel::Neutral, t)),
            );
            out
        }
        Label::Negative => {
            if cfg.constrained && !table.satisfies_any(&key, &entity.entity_type)? {
                return Ok(Vec::new());
            }
            let pool: Vec<&Template> = lib.all_templates().filter(|t| t.applies_to(&key)).collect();
            draw(&mut rng, &pool, cfg.n_contradict)
                .into_iter()
                .map(|t| (NliLabel::Contradiction, t))
                .collect()
        }
    };

    let ctx = EventContext::new(&event.trigger_surface, &event.event_type, &key);
    chosen
        .into_iter()
        .map(|(label, t)| {
            Ok(NliExample {
                premise: premise.to_string(),
                hypothesis: t.verbalize(&ctx, &entity.surface, &lib.canonical_map)?,
                label,
                meta: Provenance {
                    source: source.to_string(),
                    doc: doc.id.clone(),
                    event: event.id.clone(),
                    entity: entity.id.clone(),
                    gold_role: candidate.gold_role.clone(),
                    template_id: t.id.clone(),
                    template_role: t.role.clone(),
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecastSummary {
    pub source: String,
    pub seed: u64,
    pub candidates: usize,
    pub positives: usize,
    pub negatives_used: usize,
    pub negatives_skipped: usize,
    pub entailment: usize,
    pub neutral: usize,
    pub contradiction: usize,
}

impl RecastSummary {
    pub fn examples(&self) -> usize {
        self.entailment + self.neutral + self.contradiction
    }

    /// Label counts of an example list.
    pub fn count_labels(examples: &[NliExample]) -> (usize, usize, usize) {
        examples
            .iter()
            .fold((0, 0, 0), |(e, n, c), x| match x.label {
                NliLabel::Entailment => (e + 1, n, c),
                NliLabel::Neutral => (e, n + 1, c),
                NliLabel::Contradiction => (e, n, c + 1),
            })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recast {
    pub examples: Vec<NliExample>,
    pub summary: RecastSummary,
}

/// Recasts every candidate of the corpus in corpus order.
pub fn recast_corpus(
    docs: &[Document],
    lib: &TemplateLibrary,
    table: &ConstraintTable,
    cfg: &SamplingConfig,
    source: &str,
    exec: Execution,
) -> Result<Recast, RecastError> {
    let per_doc = exec::try_map(exec, docs, |doc| {
        generate_candidates(doc)
            .into_iter()
            .map(|c| recast_candidate(&c, doc, lib, table, cfg, source).map(|ex| (c, ex)))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut summary = RecastSummary {
        source: source.to_string(),
        seed: cfg.seed,
        ..Default::default()
    };
    let mut examples = Vec::new();
    for (c, ex) in per_doc.into_iter().flatten() {
        summary.candidates += 1;
        match (&c.gold_role, ex.is_empty()) {
            (Label::Role(_), _) => summary.positives += 1,
            (Label::Negative, true) => summary.negatives_skipped += 1,
            (Label::Negative, false) => summary.negatives_used += 1,
        }
        examples.extend(ex);
    }
    let (e, n, c) = RecastSummary::count_labels(&examples);
    summary.entailment = e;
    summary.neutral = n;
    summary.contradiction = c;
    Ok(Recast { examples, summary })
}

/// One JSON object per line.
pub fn write_examples<W: Write>(mut writer: W, examples: &[NliExample]) -> std::io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut writer, ex)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_examples(text: &str) -> serde_json::Result<Vec<NliExample>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// One fine-tuning stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<u32>,
}

impl Stage {
    pub fn new(name: impl Into<String>, path: impl Into<String>) -> Self {
        Stage {
            name: name.into(),
            path: path.into(),
            epochs: None,
        }
    }

    pub fn with_epochs(mut self, epochs: u32) -> Self {
        self.epochs = Some(epochs);
        self
    }
}

/// Ordered fine-tuning stages, target last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiSourceManifest {
    pub stages: Vec<Stage>,
}

impl MultiSourceManifest {
    pub fn target(&self) -> &Stage {
        self.stages.last().expect("manifest is never empty")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn build_manifest(
    sources: Vec<Stage>,
    target: Stage,
) -> Result<MultiSourceManifest, RecastError> {
    if sources.is_empty() {
        return Err(RecastError::NoSources);
    }
    let mut seen = BTreeSet::new();
    let mut stages = sources;
    stages.push(target);
    for s in &stages {
        if !seen.insert(s.name.clone()) {
            return Err(RecastError::DuplicateStage(s.name.clone()));
        }
    }
    Ok(MultiSourceManifest { stages })
}
