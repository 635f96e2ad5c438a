//! The task document: one cause-judgment problem as a JSON object.
//!
//! A task asks whether "Possible Cause" plausibly explains "Phenomenon" given
//! "Premises" and "Rules". Documents are one JSON object per line in dataset
//! files, with exactly these keys:
//!
//! ```json
//! {"Premises": ["Anne is responsible", ...],
//!  "Rules": ["If a person is responsible and excited then this person is trustworthy.", ...],
//!  "Phenomenon": "Anne is trustworthy",
//!  "Possible Cause": "Anne is excited",
//!  "Label": "True"}
//! ```
//!
//! Generated datasets add a "Meta" object carrying [`GroundTruth`] — the
//! chain length, which premises matter, and which rules form the chain — so
//! pruning quality can be scored without re-deriving it. Unknown top-level
//! keys survive a parse/serialize round trip untouched; a "Meta" value that
//! does not match the ground-truth schema is preserved verbatim the same way.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{parse_premise, parse_rule, Fact, Rule};

/// Generator-recorded answer key for one task.
///
/// Indices refer to positions in the task's premise and rule lists. The
/// hypothesis (the possible cause) is not a premise, so its relevance is a
/// separate flag rather than an index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    /// Reasoning chain length the task was built for (1-4).
    pub level: u32,
    /// Rule indices of the chain in application order; empty for negative
    /// tasks, which have no derivation.
    pub chain: Vec<usize>,
    /// Premise indices the derivation consumes (excluding the hypothesis).
    pub relevant_premises: BTreeSet<usize>,
    /// Whether the injected hypothesis itself is part of the derivation.
    pub hypothesis_relevant: bool,
    /// Rule indices the derivation consumes (the chain, as a set).
    pub relevant_rules: BTreeSet<usize>,
}

/// One cause-judgment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub premises: Vec<Fact>,
    pub rules: Vec<Rule>,
    pub phenomenon: Fact,
    pub possible_cause: Fact,
    pub label: bool,
    pub meta: Option<GroundTruth>,
    /// Top-level keys this library does not interpret, preserved so that
    /// serialize ∘ parse is the identity on annotated third-party documents.
    pub extra: BTreeMap<String, Value>,
}

/// A complete worked example of the document format: 12 varied premises,
/// 5 rules, and one binary rule closing the gap from the injected cause to
/// the phenomenon. Parsing it yields a well-formed positive task; handy in
/// tests and as format documentation.
pub const SAMPLE_TASK_DOC: &str = r#"{
  "Premises": [
    "Anne is responsible", "Bob is humorous", "Herry is strict",
    "Sandy is outgoing", "Bob is decisive", "Frank is optimistic",
    "Gary is honest", "Anne is adaptable", "Herry is meticulous",
    "Sandy is innovative", "Frank is diligent", "Gary is modest"
  ],
  "Rules": [
    "If a person is humorous then this person is loyal.",
    "If a person is strict and meticulous then this person is dependable.",
    "If a person is responsible and excited then this person is trustworthy.",
    "If a person is outgoing and innovative then this person is creative.",
    "If a person is optimistic and diligent then this person is perseverant."
  ],
  "Phenomenon": "Anne is trustworthy",
  "Possible Cause": "Anne is excited",
  "Label": "True"
}"#;

/// A task document could not be decoded.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("task document is not valid JSON: {0}")]
    InvalidJson(String),
    #[error("missing key {0:?}")]
    MissingKey(String),
    #[error("malformed {key:?}: {cause}")]
    Malformed { key: String, cause: String },
}

fn malformed(key: &str, cause: impl ToString) -> TaskError {
    TaskError::Malformed { key: key.to_string(), cause: cause.to_string() }
}

const KEY_PREMISES: &str = "Premises";
const KEY_RULES: &str = "Rules";
const KEY_PHENOMENON: &str = "Phenomenon";
const KEY_CAUSE: &str = "Possible Cause";
const KEY_LABEL: &str = "Label";
const KEY_META: &str = "Meta";
const CANONICAL_KEYS: [&str; 6] =
    [KEY_PREMISES, KEY_RULES, KEY_PHENOMENON, KEY_CAUSE, KEY_LABEL, KEY_META];

fn require<'v>(obj: &'v Map<String, Value>, key: &str) -> Result<&'v Value, TaskError> {
    obj.get(key).ok_or_else(|| TaskError::MissingKey(key.to_string()))
}

fn as_str<'v>(key: &str, value: &'v Value) -> Result<&'v str, TaskError> {
    value.as_str().ok_or_else(|| malformed(key, "expected a JSON string"))
}

fn string_array<'v>(obj: &'v Map<String, Value>, key: &str) -> Result<Vec<&'v str>, TaskError> {
    let items = require(obj, key)?
        .as_array()
        .ok_or_else(|| malformed(key, "expected a JSON array of strings"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, v)| v.as_str().ok_or_else(|| malformed(key, format!("item {i} is not a string"))))
        .collect()
}

/// Decodes one task document, enforcing the type's invariants (no duplicate
/// premises or rules; phenomenon and cause talk about the same entity).
pub fn parse_task(document: &str) -> Result<Task, TaskError> {
    let value: Value =
        serde_json::from_str(document).map_err(|e| TaskError::InvalidJson(e.to_string()))?;
    let obj = match value {
        Value::Object(map) => map,
        _ => return Err(TaskError::InvalidJson("expected a JSON object".to_string())),
    };

    let mut premises = Vec::new();
    for (i, text) in string_array(&obj, KEY_PREMISES)?.into_iter().enumerate() {
        let fact = parse_premise(text).map_err(|e| malformed(KEY_PREMISES, e))?;
        if premises.contains(&fact) {
            return Err(malformed(KEY_PREMISES, format!("duplicate premise at index {i}: {fact}")));
        }
        premises.push(fact);
    }

    let mut rules = Vec::new();
    for (i, text) in string_array(&obj, KEY_RULES)?.into_iter().enumerate() {
        let rule = parse_rule(text).map_err(|e| malformed(KEY_RULES, e))?;
        if rules.contains(&rule) {
            return Err(malformed(KEY_RULES, format!("duplicate rule at index {i}: {rule}")));
        }
        rules.push(rule);
    }

    let phenomenon = parse_premise(as_str(KEY_PHENOMENON, require(&obj, KEY_PHENOMENON)?)?)
        .map_err(|e| malformed(KEY_PHENOMENON, e))?;
    let possible_cause = parse_premise(as_str(KEY_CAUSE, require(&obj, KEY_CAUSE)?)?)
        .map_err(|e| malformed(KEY_CAUSE, e))?;
    if possible_cause.entity != phenomenon.entity {
        return Err(malformed(
            KEY_CAUSE,
            format!(
                "entity {:?} differs from the phenomenon's entity {:?}",
                possible_cause.entity.as_str(),
                phenomenon.entity.as_str()
            ),
        ));
    }

    let label = match as_str(KEY_LABEL, require(&obj, KEY_LABEL)?)? {
        "True" => true,
        "False" => false,
        other => return Err(malformed(KEY_LABEL, format!("expected \"True\" or \"False\", got {other:?}"))),
    };

    let mut extra = BTreeMap::new();
    let mut meta = None;
    for (key, value) in &obj {
        match key.as_str() {
            KEY_META => match serde_json::from_value::<GroundTruth>(value.clone()) {
                Ok(gt) => meta = Some(gt),
                // Third-party annotations under "Meta" pass through untouched.
                Err(_) => {
                    extra.insert(key.clone(), value.clone());
                }
            },
            k if CANONICAL_KEYS.contains(&k) => {}
            _ => {
                extra.insert(key.clone(), value.clone());
            }
        }
    }

    Ok(Task { premises, rules, phenomenon, possible_cause, label, meta, extra })
}

/// Encodes a task as one compact JSON line, keys in canonical order, unknown
/// keys appended in sorted order. The exact inverse of [`parse_task`]:
/// serialize → parse → serialize is byte-identical.
pub fn serialize_task(task: &Task) -> String {
    let mut obj = Map::new();
    obj.insert(
        KEY_PREMISES.to_string(),
        Value::Array(task.premises.iter().map(|p| json!(p.to_string())).collect()),
    );
    obj.insert(
        KEY_RULES.to_string(),
        Value::Array(task.rules.iter().map(|r| json!(r.to_string())).collect()),
    );
    obj.insert(KEY_PHENOMENON.to_string(), json!(task.phenomenon.to_string()));
    obj.insert(KEY_CAUSE.to_string(), json!(task.possible_cause.to_string()));
    obj.insert(KEY_LABEL.to_string(), json!(if task.label { "True" } else { "False" }));
    if let Some(gt) = &task.meta {
        obj.insert(
            KEY_META.to_string(),
            serde_json::to_value(gt).expect("ground truth serializes"),
        );
    }
    for (key, value) in &task.extra {
        debug_assert!(
            !CANONICAL_KEYS.contains(&key.as_str()) || (key == KEY_META && task.meta.is_none()),
            "extra key {key:?} collides with a canonical key"
        );
        obj.entry(key.clone()).or_insert_with(|| value.clone());
    }
    serde_json::to_string(&Value::Object(obj)).expect("task serializes")
}
