//! Role templates and their verbalization into hypotheses.
//!
//! A pattern is literal text with placeholders drawn from a fixed set:
//! `{arg}`, `{trg}`, `{trg_type}`, `{trg_subtype}` and `{canonical_trg}`.
//! Dummy agents and patients ("someone", "something") are plain text.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{bare_subtype, EventMention};

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template pattern is empty")]
    EmptyPattern,
    #[error("pattern {pattern:?} has no {{arg}} placeholder")]
    MissingArg { pattern: String },
    #[error("pattern {pattern:?} contains {{arg}} {count} times")]
    DuplicateArg { pattern: String, count: usize },
    #[error("pattern {pattern:?} uses unknown placeholder {{{name}}}")]
    UnknownPlaceholder { pattern: String, name: String },
    #[error("pattern {pattern:?} is {category} but lacks {{canonical_trg}}")]
    CanonicalWithoutPlaceholder {
        pattern: String,
        category: TemplateCategory,
    },
    #[error("no canonical trigger for event subtype `{subtype}` (template `{template}`)")]
    MissingCanonical { template: String, subtype: String },
    #[error("roles not in library: {}", .0.join(", "))]
    UnknownRoles(Vec<String>),
    #[error("library schema error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TemplateError {
    fn from(e: std::io::Error) -> Self {
        TemplateError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateCategory {
    ImplicitArg,
    ExplicitTrg,
    CanonicalTrg,
    CanonicalWithPlaceholder,
}

impl TemplateCategory {
    pub fn requires_canonical(self) -> bool {
        matches!(
            self,
            TemplateCategory::CanonicalTrg | TemplateCategory::CanonicalWithPlaceholder
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateCategory::ImplicitArg => "implicit-arg",
            TemplateCategory::ExplicitTrg => "explicit-trg",
            TemplateCategory::CanonicalTrg => "canonical-trg",
            TemplateCategory::CanonicalWithPlaceholder => "canonical-with-placeholder",
        }
    }
}

impl std::fmt::Display for TemplateCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "implicit-arg" => Ok(TemplateCategory::ImplicitArg),
            "explicit-trg" => Ok(TemplateCategory::ExplicitTrg),
            "canonical-trg" => Ok(TemplateCategory::CanonicalTrg),
            "canonical-with-placeholder" => Ok(TemplateCategory::CanonicalWithPlaceholder),
            other => Err(format!("unknown template category `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placeholder {
    Arg,
    Trg,
    TrgType,
    TrgSubtype,
    CanonicalTrg,
}

impl Placeholder {
    pub const ALL: [Placeholder; 5] = [
        Placeholder::Arg,
        Placeholder::Trg,
        Placeholder::TrgType,
        Placeholder::TrgSubtype,
        Placeholder::CanonicalTrg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::Arg => "arg",
            Placeholder::Trg => "trg",
            Placeholder::TrgType => "trg_type",
            Placeholder::TrgSubtype => "trg_subtype",
            Placeholder::CanonicalTrg => "canonical_trg",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(Placeholder),
}

/// Splits a pattern into literal text and placeholders. `{` followed by an
/// identifier and `}` is a placeholder; any other brace is literal text.
fn tokenize(pattern: &str) -> Result<Vec<Piece>, TemplateError> {
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let ident_len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        if ident_len > 0 && after[ident_len..].starts_with('}') {
            let name = &after[..ident_len];
            let slot =
                Placeholder::from_name(name).ok_or_else(|| TemplateError::UnknownPlaceholder {
                    pattern: pattern.to_string(),
                    name: name.to_string(),
                })?;
            if !text.is_empty() {
                pieces.push(Piece::Text(std::mem::take(&mut text)));
            }
            pieces.push(Piece::Slot(slot));
            rest = &after[ident_len + 1..];
        } else {
            text.push('{');
            rest = after;
        }
    }
    text.push_str(rest);
    if !text.is_empty() {
        pieces.push(Piece::Text(text));
    }
    Ok(pieces)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub role: String,
    pub pattern: String,
    pub category: TemplateCategory,
    pub scope: Option<BTreeSet<String>>,
    pieces: Vec<Piece>,
}

impl Template {
    /// Parses and validates a pattern.
    pub fn parse(
        id: impl Into<String>,
        role: impl Into<String>,
        raw: &str,
        category: TemplateCategory,
        scope: Option<BTreeSet<String>>,
    ) -> Result<Template, TemplateError> {
        if raw.trim().is_empty() {
            return Err(TemplateError::EmptyPattern);
        }
        let pieces = tokenize(raw)?;
        let count = |p: Placeholder| pieces.iter().filter(|x| **x == Piece::Slot(p)).count();
        match count(Placeholder::Arg) {
            0 => {
                return Err(TemplateError::MissingArg {
                    pattern: raw.to_string(),
                })
            }
            1 => {}
            n => {
                return Err(TemplateError::DuplicateArg {
                    pattern: raw.to_string(),
                    count: n,
                })
            }
        }
        if category.requires_canonical() && count(Placeholder::CanonicalTrg) == 0 {
            return Err(TemplateError::CanonicalWithoutPlaceholder {
                pattern: raw.to_string(),
                category,
            });
        }
        Ok(Template {
            id: id.into(),
            role: role.into(),
            pattern: raw.to_string(),
            category,
            scope,
            pieces,
        })
    }

    pub fn uses(&self, p: Placeholder) -> bool {
        self.pieces.contains(&Piece::Slot(p))
    }

    /// Whether the template applies to events of the given subtype key.
    /// Unscoped templates apply everywhere; scope entries may be written
    /// qualified (`Justice.Arrest-Jail`) or bare (`Arrest-Jail`).
    pub fn applies_to(&self, subtype_key: &str) -> bool {
        match &self.scope {
            None => true,
            Some(scope) => scope.iter().any(|s| subtype_matches(s, subtype_key)),
        }
    }

    /// Substitutes every placeholder in a single left-to-right pass, so
    /// placeholder-like text inside the substituted values is never expanded.
    pub fn verbalize(
        &self,
        ctx: &EventContext<'_>,
        arg_surface: &str,
        canonical_map: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        let canonical = if self.uses(Placeholder::CanonicalTrg) {
            Some(
                lookup_subtype(canonical_map, ctx.subtype_key).ok_or_else(|| {
                    TemplateError::MissingCanonical {
                        template: self.id.clone(),
                        subtype: ctx.subtype_key.to_string(),
                    }
                })?,
            )
        } else {
            None
        };
        let mut out = String::with_capacity(
            self.pattern.len() + arg_surface.len() + ctx.trigger_surface.len(),
        );
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(Placeholder::Arg) => out.push_str(arg_surface),
                Piece::Slot(Placeholder::Trg) => out.push_str(ctx.trigger_surface),
                Piece::Slot(Placeholder::TrgType) => out.push_str(ctx.event_type),
                Piece::Slot(Placeholder::TrgSubtype) => out.push_str(bare_subtype(ctx.subtype_key)),
                Piece::Slot(Placeholder::CanonicalTrg) => {
                    out.push_str(canonical.unwrap_or_default())
                }
            }
        }
        Ok(out)
    }
}

/// Equal keys match; a bare key also matches any qualified key ending in it.
fn subtype_matches(a: &str, b: &str) -> bool {
    a == b || ((!a.contains('.') || !b.contains('.')) && bare_subtype(a) == bare_subtype(b))
}

fn lookup_subtype<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Option<&'a str> {
    map.get(key)
        .or_else(|| {
            map.iter()
                .find(|(k, _)| subtype_matches(k, key))
                .map(|(_, v)| v)
        })
        .map(String::as_str)
}

/// Surface information about the event being verbalized.
#[derive(Debug, Clone, Copy)]
pub struct EventContext<'a> {
    pub trigger_surface: &'a str,
    pub event_type: &'a str,
    /// Qualified (`Type.Subtype`) or bare subtype.
    pub subtype_key: &'a str,
}

impl<'a> EventContext<'a> {
    pub fn new(trigger_surface: &'a str, event_type: &'a str, subtype_key: &'a str) -> Self {
        EventContext {
            trigger_surface,
            event_type,
            subtype_key,
        }
    }
}

/// Owned variant of [`EventContext`] built from an event mention.
#[derive(Debug, Clone)]
pub struct OwnedEventContext {
    pub trigger_surface: String,
    pub event_type: String,
    pub subtype_key: String,
}

impl OwnedEventContext {
    pub fn of(event: &EventMention) -> Self {
        OwnedEventContext {
            trigger_surface: event.trigger_surface.clone(),
            event_type: event.event_type.clone(),
            subtype_key: event.subtype_key(),
        }
    }

    pub fn borrow(&self) -> EventContext<'_> {
        EventContext::new(&self.trigger_surface, &self.event_type, &self.subtype_key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub role: String,
    pub template_id: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LibraryMetadata {
    #[serde(default)]
    pub developer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
    #[serde(default)]
    pub elapsed_seconds_per_role: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateLibrary {
    templates: BTreeMap<String, Vec<Template>>,
    pub canonical_map: BTreeMap<String, String>,
    pub metadata: LibraryMetadata,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateRecord {
    id: String,
    pattern: String,
    category: TemplateCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scope: Option<BTreeSet<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryRecord {
    roles: BTreeMap<String, Vec<TemplateRecord>>,
    #[serde(default)]
    canonical_map: BTreeMap<String, String>,
    #[serde(default)]
    metadata: LibraryMetadata,
}

/// Wire shape of one template (library files and the HTTP API).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub id: String,
    pub pattern: String,
    pub category: TemplateCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<BTreeSet<String>>,
}

impl TemplateSpec {
    pub fn into_template(self, role: &str) -> Result<Template, TemplateError> {
        Template::parse(self.id, role, &self.pattern, self.category, self.scope)
    }
}

impl From<&Template> for TemplateSpec {
    fn from(t: &Template) -> Self {
        TemplateSpec {
            id: t.id.clone(),
            pattern: t.pattern.clone(),
            category: t.category,
            scope: t.scope.clone(),
        }
    }
}

const ACE_MAIN: &str = include_str!("../data/ace_main.json");
const ACE_LINGUIST: &str = include_str!("../data/ace_linguist.json");

impl TemplateLibrary {
    /// Builds and validates a library.
    pub fn new(
        templates: BTreeMap<String, Vec<Template>>,
        canonical_map: BTreeMap<String, String>,
        metadata: LibraryMetadata,
    ) -> Result<Self, TemplateError> {
        let mut lib = TemplateLibrary {
            templates,
            canonical_map,
            metadata,
        };
        for list in lib.templates.values_mut() {
            list.sort_by(|a, b| a.id.cmp(&b.id));
        }
        lib.validate()?;
        Ok(lib)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let mut ids = HashSet::new();
        for (role, list) in &self.templates {
            if list.is_empty() {
                return Err(TemplateError::Schema {
                    location: format!("roles.{role}"),
                    message: "role has no templates".into(),
                });
            }
            for t in list {
                let location = format!("roles.{role}.{}", t.id);
                if t.role != *role {
                    return Err(TemplateError::Schema {
                        location,
                        message: format!("template role `{}` filed under `{role}`", t.role),
                    });
                }
                if t.id.is_empty() || !ids.insert(t.id.as_str()) {
                    return Err(TemplateError::Schema {
                        location,
                        message: "template ids must be non-empty and unique".into(),
                    });
                }
                if t.uses(Placeholder::CanonicalTrg) {
                    let ok = match &t.scope {
                        Some(scope) => scope
                            .iter()
                            .all(|s| lookup_subtype(&self.canonical_map, s).is_some()),
                        None => !self.canonical_map.is_empty(),
                    };
                    if !ok {
                        return Err(TemplateError::Schema {
                            location,
                            message: "{canonical_trg} template without canonical_map entries for its scope".into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn role_set(&self) -> BTreeSet<String> {
        self.templates.keys().cloned().collect()
    }

    pub fn templates(&self, role: &str) -> Option<&[Template]> {
        self.templates.get(role).map(Vec::as_slice)
    }

    pub fn all_templates(&self) -> impl Iterator<Item = &Template> {
        self.templates.values().flatten()
    }

    pub fn template_count(&self) -> usize {
        self.templates.values().map(Vec::len).sum()
    }

    /// Templates of `role` in id order whose scope admits the subtype.
    pub fn applicable<'a>(
        &'a self,
        role: &str,
        subtype_key: &'a str,
    ) -> impl Iterator<Item = &'a Template> + 'a {
        self.templates
            .get(role)
            .into_iter()
            .flatten()
            .filter(move |t| t.applies_to(subtype_key))
    }

    /// Replaces the template list of one role, re-validating the whole
    /// library. On error the library is left untouched.
    pub fn set_role(
        &mut self,
        role: &str,
        mut templates: Vec<Template>,
    ) -> Result<(), TemplateError> {
        templates.sort_by(|a, b| a.id.cmp(&b.id));
        let mut next = self.clone();
        next.templates.insert(role.to_string(), templates);
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn verbalize_role_set(
        &self,
        ctx: &EventContext<'_>,
        arg_surface: &str,
        roles: &BTreeSet<String>,
    ) -> Result<Vec<Hypothesis>, TemplateError> {
        let unknown: Vec<String> = roles
            .iter()
            .filter(|r| !self.templates.contains_key(*r))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(TemplateError::UnknownRoles(unknown));
        }
        let mut out = Vec::new();
        for role in roles {
            for t in self.applicable(role, ctx.subtype_key) {
                out.push(Hypothesis {
                    role: role.clone(),
                    template_id: t.id.clone(),
                    hypothesis: t.verbalize(ctx, arg_surface, &self.canonical_map)?,
                });
            }
        }
        Ok(out)
    }

    pub fn from_json(s: &str) -> Result<Self, TemplateError> {
        let record: LibraryRecord = serde_json::from_str(s).map_err(|e| TemplateError::Schema {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let mut templates = BTreeMap::new();
        for (role, list) in record.roles {
            let mut parsed = Vec::with_capacity(list.len());
            for (i, t) in list.into_iter().enumerate() {
                let tpl = Template::parse(t.id, role.as_str(), &t.pattern, t.category, t.scope)
                    .map_err(|e| TemplateError::Schema {
                        location: format!("roles.{role}[{i}]"),
                        message: e.to_string(),
                    })?;
                parsed.push(tpl);
            }
            templates.insert(role, parsed);
        }
        TemplateLibrary::new(templates, record.canonical_map, record.metadata)
    }

    /// Canonical serialization: pretty JSON, sorted keys, trailing newline.
    pub fn to_json(&self) -> String {
        let record = LibraryRecord {
            roles: self
                .templates
                .iter()
                .map(|(role, list)| {
                    (
                        role.clone(),
                        list.iter()
                            .map(|t| TemplateRecord {
                                id: t.id.clone(),
                                pattern: t.pattern.clone(),
                                category: t.category,
                                scope: t.scope.clone(),
                            })
                            .collect(),
                    )
                })
                .collect(),
            canonical_map: self.canonical_map.clone(),
            metadata: self.metadata.clone(),
        };
        let mut s = serde_json::to_string_pretty(&record).expect("library serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TemplateError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    /// ACE templates written by the main developer.
    pub fn ace_main() -> Self {
        Self::from_json(ACE_MAIN).expect("shipped library is valid")
    }

    /// ACE templates written by the linguist.
    pub fn ace_linguist() -> Self {
        Self::from_json(ACE_LINGUIST).expect("shipped library is valid")
    }

    pub fn shipped_json(name: &str) -> Option<&'static str> {
        match name {
            "ace-main" => Some(ACE_MAIN),
            "ace-linguist" => Some(ACE_LINGUIST),
            _ => None,
        }
    }
}
