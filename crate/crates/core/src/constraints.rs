//! Trigger/entity type constraints.
//!
//! The file layout is `{<subtype>: {<role>: [<entity_type>, ...]}}`. The
//! entity type `*` admits every type, and a subtype key `*` answers queries
//! for subtypes the table does not list.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::corpus::bare_subtype;

pub const WILDCARD: &str = "*";

#[derive(Debug, Error, PartialEq)]
pub enum ConstraintError {
    #[error("event subtype `{0}` is not in the constraint table")]
    UnknownSubtype(String),
    #[error("constraint table error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintTable {
    allowed: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
}

const ACE_CONSTRAINTS: &str = include_str!("../data/ace_constraints.json");

impl ConstraintTable {
    pub fn new(
        allowed: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
    ) -> Result<Self, ConstraintError> {
        for (subtype, roles) in &allowed {
            for (role, types) in roles {
                if types.is_empty() {
                    return Err(ConstraintError::Schema {
                        location: format!("{subtype}.{role}"),
                        message: "empty entity type set".into(),
                    });
                }
            }
        }
        Ok(ConstraintTable { allowed })
    }

    /// Every listed role of every subtype accepts any entity type, and
    /// unknown subtypes fall back to the full role list.
    pub fn allow_all<I, S>(roles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let any: BTreeSet<String> = [WILDCARD.to_string()].into();
        let roles = roles.into_iter().map(|r| (r.into(), any.clone())).collect();
        let mut allowed = BTreeMap::new();
        allowed.insert(WILDCARD.to_string(), roles);
        ConstraintTable { allowed }
    }

    /// Constraint table reconstructed from the ACE 2005 annotation guidelines.
    pub fn ace() -> Self {
        Self::from_json(ACE_CONSTRAINTS).expect("shipped constraint table is valid")
    }

    pub fn from_json(s: &str) -> Result<Self, ConstraintError> {
        let raw: BTreeMap<String, BTreeMap<String, BTreeSet<String>>> = serde_json::from_str(s)
            .map_err(|e| ConstraintError::Schema {
                location: format!("line {}, column {}", e.line(), e.column()),
                message: e.to_string(),
            })?;
        Self::new(raw)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.allowed).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConstraintError> {
        let s = fs::read_to_string(path).map_err(|e| ConstraintError::Io(e.to_string()))?;
        Self::from_json(&s)
    }

    fn entry(&self, subtype: &str) -> Result<&BTreeMap<String, BTreeSet<String>>, ConstraintError> {
        self.allowed
            .get(subtype)
            .or_else(|| self.allowed.get(bare_subtype(subtype)))
            .or_else(|| {
                let bare = bare_subtype(subtype);
                let mut hits = self.allowed.iter().filter(|(k, _)| bare_subtype(k) == bare);
                match (hits.next(), hits.next()) {
                    (Some((_, v)), None) => Some(v),
                    _ => None,
                }
            })
            .or_else(|| self.allowed.get(WILDCARD))
            .ok_or_else(|| ConstraintError::UnknownSubtype(subtype.to_string()))
    }

    pub fn subtypes(&self) -> impl Iterator<Item = &str> {
        self.allowed.keys().map(String::as_str)
    }

    pub fn roles_of_event(&self, subtype: &str) -> Result<BTreeSet<String>, ConstraintError> {
        Ok(self.entry(subtype)?.keys().cloned().collect())
    }

    /// Every role mentioned anywhere in the table.
    pub fn all_roles(&self) -> BTreeSet<String> {
        self.allowed
            .values()
            .flat_map(|r| r.keys().cloned())
            .collect()
    }

    pub fn allowed_roles(
        &self,
        subtype: &str,
        entity_type: &str,
    ) -> Result<BTreeSet<String>, ConstraintError> {
        Ok(self
            .entry(subtype)?
            .iter()
            .filter(|(_, types)| types.contains(entity_type) || types.contains(WILDCARD))
            .map(|(role, _)| role.clone())
            .collect())
    }

    pub fn satisfies_any(&self, subtype: &str, entity_type: &str) -> Result<bool, ConstraintError> {
        Ok(self
            .entry(subtype)?
            .values()
            .any(|types| types.contains(entity_type) || types.contains(WILDCARD)))
    }

    /// Adds one (subtype, role, entity type) grant.
    pub fn grant(&mut self, subtype: &str, role: &str, entity_type: &str) {
        self.allowed
            .entry(subtype.to_string())
            .or_default()
            .entry(role.to_string())
            .or_default()
            .insert(entity_type.to_string());
    }
}
