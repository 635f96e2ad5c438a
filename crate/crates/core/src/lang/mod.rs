//! The task language: entities, attributes, facts, rules, and task documents.
//!
//! Everything a task can say is built from two symbol kinds. An [`Entity`] is
//! a capitalized name ("Anne"); an [`Attribute`] is a lowercase adjective
//! ("excited"). A [`Fact`] asserts an attribute of an entity, and a [`Rule`]
//! propagates attributes within one person: "If a person is X and Y then this
//! person is Z." Rules never cross entities, which keeps reasoning local and
//! lets a brute-force oracle stay cheap.
//!
//! Rendering and parsing are exact inverses on canonical text. Parsers accept
//! small surface variations (an optional trailing period, duplicated
//! antecedents) and normalize them away; [`parse_rule_detailed`] reports what
//! was normalized so dataset audits can count it.

mod parse;
mod task;

pub use parse::{parse_premise, parse_rule, parse_rule_detailed, ParseError, RuleParseFlags};
pub use task::{parse_task, serialize_task, GroundTruth, Task, TaskError, SAMPLE_TASK_DOC};

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A symbol failed validation or a rule had the wrong shape.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    /// Entity names are one capitalized, letters-only word.
    #[error("invalid entity name {0:?}: expected a capitalized word of letters")]
    InvalidEntity(String),
    /// Attribute names are one lowercase, letters-only word.
    #[error("invalid attribute name {0:?}: expected a lowercase word of letters")]
    InvalidAttribute(String),
    /// Rules carry one or two distinct antecedents.
    #[error("rule must have one or two distinct antecedents, got {0}")]
    RuleArity(usize),
}

/// A named individual: one word, leading uppercase letter, letters only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Entity(String);

impl Entity {
    pub fn new(name: impl Into<String>) -> Result<Self, LangError> {
        let name = name.into();
        let mut chars = name.chars();
        let valid = matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
            && chars.all(|c| c.is_ascii_alphabetic());
        if valid {
            Ok(Entity(name))
        } else {
            Err(LangError::InvalidEntity(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A personality attribute: one word, lowercase letters only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Attribute(String);

impl Attribute {
    pub fn new(name: impl Into<String>) -> Result<Self, LangError> {
        let name = name.into();
        if !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase()) {
            Ok(Attribute(name))
        } else {
            Err(LangError::InvalidAttribute(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

// Symbols serialize as their bare text so configs and manifests stay
// readable; deserialization re-validates, so malformed pools are caught at
// load time rather than deep inside generation.
macro_rules! string_serde {
    ($ty:ident) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }
        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                $ty::new(raw).map_err(serde::de::Error::custom)
            }
        }
    };
}
string_serde!(Entity);
string_serde!(Attribute);

/// An atomic statement: this entity has this attribute.
///
/// Renders as `"Anne is excited"` — no trailing period, matching how premises
/// appear inside task documents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub entity: Entity,
    pub attribute: Attribute,
}

impl Fact {
    pub fn new(entity: Entity, attribute: Attribute) -> Self {
        Fact { entity, attribute }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} is {}", self.entity, self.attribute)
    }
}

/// A within-person implication with one or two antecedent attributes.
///
/// Renders with the fixed surface form used throughout task documents,
/// including the trailing period:
/// `"If a person is happy and rich then this person is kind."`
///
/// Antecedents are stored deduplicated in their surface order. A rule whose
/// consequent repeats an antecedent is representable (some imported data
/// contains such tautologies) and can be detected via [`Rule::is_tautology`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    antecedents: Vec<Attribute>,
    consequent: Attribute,
}

impl Rule {
    /// Builds a rule, collapsing duplicate antecedents. After deduplication
    /// there must be one or two of them.
    pub fn new(antecedents: Vec<Attribute>, consequent: Attribute) -> Result<Self, LangError> {
        let mut deduped: Vec<Attribute> = Vec::with_capacity(antecedents.len());
        for a in antecedents {
            if !deduped.contains(&a) {
                deduped.push(a);
            }
        }
        if deduped.is_empty() || deduped.len() > 2 {
            return Err(LangError::RuleArity(deduped.len()));
        }
        Ok(Rule { antecedents: deduped, consequent })
    }

    pub fn antecedents(&self) -> &[Attribute] {
        &self.antecedents
    }

    pub fn consequent(&self) -> &Attribute {
        &self.consequent
    }

    /// True when the consequent already appears among the antecedents, so
    /// applying the rule can never add information.
    pub fn is_tautology(&self) -> bool {
        self.antecedents.contains(&self.consequent)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "If a person is {}", self.antecedents[0])?;
        if let Some(second) = self.antecedents.get(1) {
            write!(f, " and {}", second)?;
        }
        write!(f, " then this person is {}.", self.consequent)
    }
}
