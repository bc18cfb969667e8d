//! Neutral corpus model, the native line-delimited format, and candidate
//! generation.
//!
//! Offsets everywhere are 0-based, end-exclusive and counted in Unicode
//! scalar values (`char`s), not bytes.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved label for a candidate that takes no part in the event.
pub const NEGATIVE: &str = "NEGATIVE";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("document `{doc}`: invalid {field}: {message}")]
    Invalid {
        doc: String,
        field: String,
        message: String,
    },
}

impl CorpusError {
    fn invalid(doc: &str, field: impl Into<String>, message: impl Into<String>) -> Self {
        CorpusError::Invalid {
            doc: doc.to_string(),
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Role label or the negative class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Label {
    Role(String),
    Negative,
}

impl Label {
    pub fn role(&self) -> Option<&str> {
        match self {
            Label::Role(r) => Some(r),
            Label::Negative => None,
        }
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, Label::Negative)
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        if s == NEGATIVE {
            Label::Negative
        } else {
            Label::Role(s)
        }
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::from(s.to_string())
    }
}

impl From<Label> for String {
    fn from(l: Label) -> Self {
        match l {
            Label::Role(r) => r,
            Label::Negative => NEGATIVE.to_string(),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Role(r) => f.write_str(r),
            Label::Negative => f.write_str(NEGATIVE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub id: String,
    pub span: Span,
    pub surface: String,
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Argument {
    pub entity_id: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventMention {
    pub id: String,
    pub trigger_span: Span,
    pub trigger_surface: String,
    pub event_type: String,
    pub event_subtype: String,
    pub arguments: Vec<Argument>,
}

impl EventMention {
    /// Schema key in `Type.Subtype` form (e.g. `Movement.Transport`).
    ///
    /// A subtype that is already qualified is returned unchanged.
    pub fn subtype_key(&self) -> String {
        qualify_subtype(&self.event_type, &self.event_subtype)
    }

    /// Subtype without its type prefix (`Transport`).
    pub fn bare_subtype(&self) -> &str {
        bare_subtype(&self.event_subtype)
    }
}

pub fn qualify_subtype(event_type: &str, event_subtype: &str) -> String {
    if event_subtype.contains('.') || event_type.is_empty() {
        event_subtype.to_string()
    } else {
        format!("{event_type}.{event_subtype}")
    }
}

pub fn bare_subtype(subtype: &str) -> &str {
    subtype.rsplit('.').next().unwrap_or(subtype)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub sentences: Vec<Span>,
    pub entities: Vec<EntityMention>,
    pub events: Vec<EventMention>,
    pub coref_chains: Vec<Vec<String>>,
}

/// Returns the substring covering char offsets `[start, end)`.
pub fn char_slice(text: &str, span: Span) -> Option<&str> {
    if span.start > span.end {
        return None;
    }
    let mut indices = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()));
    let start = indices.nth(span.start)?;
    let end = if span.end == span.start {
        start
    } else {
        indices.nth(span.end - span.start - 1)?
    };
    Some(&text[start..end])
}

impl Document {
    pub fn entity(&self, id: &str) -> Option<&EntityMention> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn event(&self, id: &str) -> Option<&EventMention> {
        self.events.iter().find(|e| e.id == id)
    }

    /// Index of the sentence fully containing `span`.
    pub fn sentence_of(&self, span: Span) -> Option<usize> {
        self.sentences.iter().position(|s| s.contains(&span))
    }

    pub fn sentence_text(&self, index: usize) -> Option<&str> {
        self.sentences
            .get(index)
            .and_then(|s| char_slice(&self.text, *s))
    }

    /// Text of the sentence containing the event's trigger.
    pub fn trigger_sentence(&self, event: &EventMention) -> Option<&str> {
        self.sentence_of(event.trigger_span)
            .and_then(|i| self.sentence_text(i))
    }

    /// Checks every structural invariant of the document.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let id = self.id.as_str();
        if id.is_empty() {
            return Err(CorpusError::invalid(id, "id", "empty document id"));
        }
        let len = self.text.chars().count();
        let mut prev_end = 0;
        for (i, s) in self.sentences.iter().enumerate() {
            if s.is_empty() || s.end > len {
                return Err(CorpusError::invalid(
                    id,
                    format!("sentences[{i}]"),
                    format!(
                        "range [{}, {}) outside text of length {len}",
                        s.start, s.end
                    ),
                ));
            }
            if i > 0 && s.start < prev_end {
                return Err(CorpusError::invalid(
                    id,
                    format!("sentences[{i}]"),
                    "sentence ranges overlap or are unsorted",
                ));
            }
            prev_end = s.end;
        }

        let mut entity_ids = HashSet::new();
        for e in &self.entities {
            let field = format!("entity `{}`", e.id);
            if !entity_ids.insert(e.id.as_str()) {
                return Err(CorpusError::invalid(id, field, "duplicate entity id"));
            }
            if e.entity_type.is_empty() {
                return Err(CorpusError::invalid(id, field, "empty entity type"));
            }
            match char_slice(&self.text, e.span) {
                Some(s) if !e.span.is_empty() && s == e.surface => {}
                Some(s) if !e.span.is_empty() => {
                    return Err(CorpusError::invalid(
                        id,
                        field,
                        format!("surface {:?} does not match text {:?}", e.surface, s),
                    ))
                }
                _ => return Err(CorpusError::invalid(id, field, "span outside text")),
            }
            let containing = self
                .sentences
                .iter()
                .filter(|s| s.contains(&e.span))
                .count();
            if containing != 1 {
                return Err(CorpusError::invalid(
                    id,
                    field,
                    format!("mention lies in {containing} sentences, expected exactly one"),
                ));
            }
        }

        let mut event_ids = HashSet::new();
        for ev in &self.events {
            let field = format!("event `{}`", ev.id);
            if !event_ids.insert(ev.id.as_str()) {
                return Err(CorpusError::invalid(id, field, "duplicate event id"));
            }
            if ev.event_subtype.is_empty() {
                return Err(CorpusError::invalid(id, field, "empty event subtype"));
            }
            match char_slice(&self.text, ev.trigger_span) {
                Some(s) if !ev.trigger_span.is_empty() && s == ev.trigger_surface => {}
                Some(s) if !ev.trigger_span.is_empty() => {
                    return Err(CorpusError::invalid(
                        id,
                        field,
                        format!(
                            "trigger surface {:?} does not match text {:?}",
                            ev.trigger_surface, s
                        ),
                    ))
                }
                _ => return Err(CorpusError::invalid(id, field, "trigger span outside text")),
            }
            if self.sentence_of(ev.trigger_span).is_none() {
                return Err(CorpusError::invalid(
                    id,
                    field,
                    "trigger is not inside a sentence",
                ));
            }
            let mut seen = HashSet::new();
            for a in &ev.arguments {
                if !entity_ids.contains(a.entity_id.as_str()) {
                    return Err(CorpusError::invalid(
                        id,
                        field,
                        format!("argument references unknown entity `{}`", a.entity_id),
                    ));
                }
                if a.role.is_empty() || a.role == NEGATIVE {
                    return Err(CorpusError::invalid(
                        id,
                        field,
                        format!("invalid role {:?}", a.role),
                    ));
                }
                if !seen.insert((a.entity_id.as_str(), a.role.as_str())) {
                    return Err(CorpusError::invalid(
                        id,
                        field,
                        format!("duplicate argument ({}, {})", a.entity_id, a.role),
                    ));
                }
            }
        }

        for (i, chain) in self.coref_chains.iter().enumerate() {
            for m in chain {
                if !entity_ids.contains(m.as_str()) {
                    return Err(CorpusError::invalid(
                        id,
                        format!("coref[{i}]"),
                        format!("unknown entity `{m}`"),
                    ));
                }
            }
        }
        Ok(())
    }
}

// Native record layout. Surfaces are optional on input (checked when
// present) and omitted on output.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRecord {
    id: String,
    text: String,
    sentences: Vec<[usize; 2]>,
    #[serde(default)]
    entities: Vec<EntityRecord>,
    #[serde(default)]
    events: Vec<EventRecord>,
    #[serde(default)]
    coref: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityRecord {
    id: String,
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    entity_type: String,
    #[serde(default, skip_serializing)]
    surface: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TriggerRecord {
    start: usize,
    end: usize,
    #[serde(default, skip_serializing)]
    surface: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    id: String,
    trigger: TriggerRecord,
    #[serde(rename = "type")]
    event_type: String,
    subtype: String,
    #[serde(default)]
    arguments: Vec<ArgumentRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArgumentRecord {
    entity_id: String,
    role: String,
}

impl DocumentRecord {
    fn into_document(self) -> Result<Document, CorpusError> {
        let text = self.text;
        let doc_id = self.id;
        let resolve =
            |span: Span, given: Option<String>, what: &str| -> Result<String, CorpusError> {
                let actual = char_slice(&text, span)
                    .ok_or_else(|| CorpusError::invalid(&doc_id, what, "span outside text"))?;
                match given {
                    Some(g) if g != actual => Err(CorpusError::invalid(
                        &doc_id,
                        what,
                        format!("surface {g:?} does not match text {actual:?}"),
                    )),
                    _ => Ok(actual.to_string()),
                }
            };
        let mut entities = Vec::with_capacity(self.entities.len());
        for e in self.entities {
            let span = Span::new(e.start, e.end);
            let surface = resolve(span, e.surface, &format!("entity `{}`", e.id))?;
            entities.push(EntityMention {
                id: e.id,
                span,
                surface,
                entity_type: e.entity_type,
            });
        }
        let mut events = Vec::with_capacity(self.events.len());
        for ev in self.events {
            let span = Span::new(ev.trigger.start, ev.trigger.end);
            let trigger_surface = resolve(span, ev.trigger.surface, &format!("event `{}`", ev.id))?;
            events.push(EventMention {
                id: ev.id,
                trigger_span: span,
                trigger_surface,
                event_type: ev.event_type,
                event_subtype: ev.subtype,
                arguments: ev
                    .arguments
                    .into_iter()
                    .map(|a| Argument {
                        entity_id: a.entity_id,
                        role: a.role,
                    })
                    .collect(),
            });
        }
        let doc = Document {
            id: doc_id,
            text,
            sentences: self
                .sentences
                .iter()
                .map(|[s, e]| Span::new(*s, *e))
                .collect(),
            entities,
            events,
            coref_chains: self.coref,
        };
        doc.validate()?;
        Ok(doc)
    }

    fn from_document(doc: &Document) -> Self {
        DocumentRecord {
            id: doc.id.clone(),
            text: doc.text.clone(),
            sentences: doc.sentences.iter().map(|s| [s.start, s.end]).collect(),
            entities: doc
                .entities
                .iter()
                .map(|e| EntityRecord {
                    id: e.id.clone(),
                    start: e.span.start,
                    end: e.span.end,
                    entity_type: e.entity_type.clone(),
                    surface: None,
                })
                .collect(),
            events: doc
                .events
                .iter()
                .map(|ev| EventRecord {
                    id: ev.id.clone(),
                    trigger: TriggerRecord {
                        start: ev.trigger_span.start,
                        end: ev.trigger_span.end,
                        surface: None,
                    },
                    event_type: ev.event_type.clone(),
                    subtype: ev.event_subtype.clone(),
                    arguments: ev
                        .arguments
                        .iter()
                        .map(|a| ArgumentRecord {
                            entity_id: a.entity_id.clone(),
                            role: a.role.clone(),
                        })
                        .collect(),
                })
                .collect(),
            coref: doc.coref_chains.clone(),
        }
    }
}

/// Parses a native corpus from any reader. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord =
            serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
                line: i + 1,
                source,
            })?;
        docs.push(record.into_document()?);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let file = fs::File::open(path)?;
    read_corpus(BufReader::new(file))
}

/// Canonical serialization of one document (a single line, no newline).
pub fn document_to_line(doc: &Document) -> String {
    serde_json::to_string(&DocumentRecord::from_document(doc)).expect("document record serializes")
}

pub fn write_corpus<W: Write>(mut writer: W, docs: &[Document]) -> std::io::Result<()> {
    for doc in docs {
        writer.write_all(document_to_line(doc).as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<(), CorpusError> {
    let file = fs::File::create(path)?;
    write_corpus(std::io::BufWriter::new(file), docs)?;
    Ok(())
}

/// One (event, entity mention) pair considered as a possible argument.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub document_id: String,
    pub event_id: String,
    pub entity_id: String,
    pub gold_role: Label,
}

impl Candidate {
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.document_id, &self.event_id, &self.entity_id)
    }
}

/// Every entity mention sharing the trigger's sentence becomes a candidate.
///
/// The gold label is the first role the event assigns to the mention; any
/// further roles for the same pair are reported by [`gold_arguments`] as
/// unreachable gold.
pub fn generate_candidates(doc: &Document) -> Vec<Candidate> {
    let entity_sentence: Vec<Option<usize>> = doc
        .entities
        .iter()
        .map(|e| doc.sentence_of(e.span))
        .collect();
    let mut out = Vec::new();
    for ev in &doc.events {
        let Some(sentence) = doc.sentence_of(ev.trigger_span) else {
            continue;
        };
        for (entity, sent) in doc.entities.iter().zip(&entity_sentence) {
            if *sent != Some(sentence) {
                continue;
            }
            let gold_role = ev
                .arguments
                .iter()
                .find(|a| a.entity_id == entity.id)
                .map(|a| Label::Role(a.role.clone()))
                .unwrap_or(Label::Negative);
            out.push(Candidate {
                document_id: doc.id.clone(),
                event_id: ev.id.clone(),
                entity_id: entity.id.clone(),
                gold_role,
            });
        }
    }
    out
}

/// A gold (event, entity, role) link with whether a candidate carries it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoldArgument {
    pub document_id: String,
    pub event_id: String,
    pub entity_id: String,
    pub role: String,
    /// `false` when the mention is outside the trigger sentence or the role
    /// is a second role for an already-labelled pair.
    pub reachable: bool,
}

pub fn gold_arguments(doc: &Document) -> Vec<GoldArgument> {
    let mut out = Vec::new();
    for ev in &doc.events {
        let trig = doc.sentence_of(ev.trigger_span);
        let mut labelled: HashSet<&str> = HashSet::new();
        for a in &ev.arguments {
            let same_sentence = doc
                .entity(&a.entity_id)
                .map(|e| doc.sentence_of(e.span) == trig && trig.is_some())
                .unwrap_or(false);
            let first = labelled.insert(a.entity_id.as_str());
            out.push(GoldArgument {
                document_id: doc.id.clone(),
                event_id: ev.id.clone(),
                entity_id: a.entity_id.clone(),
                role: a.role.clone(),
                reachable: same_sentence && first,
            });
        }
    }
    out
}

/// Maps every entity id to a chain index; mentions outside any chain get a
/// singleton chain of their own.
pub fn coref_index(doc: &Document) -> HashMap<String, usize> {
    let mut index = HashMap::new();
    for (i, chain) in doc.coref_chains.iter().enumerate() {
        for m in chain {
            index.entry(m.clone()).or_insert(i);
        }
    }
    let mut next = doc.coref_chains.len();
    for e in &doc.entities {
        index.entry(e.id.clone()).or_insert_with(|| {
            next += 1;
            next - 1
        });
    }
    index
}

/// All role names used by gold arguments across a corpus.
pub fn gold_roles(docs: &[Document]) -> BTreeSet<String> {
    docs.iter()
        .flat_map(|d| d.events.iter())
        .flat_map(|e| e.arguments.iter().map(|a| a.role.clone()))
        .collect()
}
