//! Entailment-based event argument extraction.
//!
//! Candidate arguments are verbalized through role templates, scored by a
//! pluggable entailment backend, filtered by trigger/entity type constraints
//! and thresholded into a role or the negative class. The same templates turn
//! an annotated corpus into NLI training data, and the `eval` module scores
//! predictions with micro F1, Coref-F1 and area under the few-shot curve.

pub mod constraints;
pub mod corpus;
pub mod entailment;
pub mod eval;
pub mod exec;
pub mod inference;
pub mod recast;
pub mod splits;
pub mod synthetic;
pub mod templates;

pub use constraints::ConstraintTable;
pub use corpus::{Candidate, Document, EntityMention, EventMention, Label, Span};
pub use entailment::{EntailmentJudgment, PremiseHypothesisPair, Scorer};
pub use exec::Execution;
pub use inference::{InferenceConfig, RolePrediction};
pub use recast::{NliExample, SamplingConfig};
pub use templates::{Template, TemplateCategory, TemplateLibrary};
