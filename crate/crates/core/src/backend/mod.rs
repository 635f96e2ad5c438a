//! Reasoner backends: where relevance judgments and verdicts come from.
//!
//! Three implementations share one [`Backend`] trait:
//!
//! - [`SymbolicBackend`] answers from the inference engine — the exact oracle
//!   used to validate the pipeline end to end.
//! - [`NoisyBackend`] wraps the oracle and flips each relevance keep/drop
//!   decision independently with a configured probability, for studying how
//!   the pipeline degrades under imperfect pruning.
//! - [`RemoteBackend`] talks to a chat-completion HTTP endpoint.
//!
//! Callers do not use the trait directly; the wrapper operations
//! ([`judge_relevance`], [`reason_forward`], [`answer_direct`]) render the
//! prompt, time the call, parse the reply, and return the parsed value
//! alongside a [`BackendCall`] record. A call that fails or defies parsing
//! yields `None` — never a guessed value — and the record says why.

pub mod answer;
mod noisy;
mod prompt;
mod remote;
mod symbolic;

pub use noisy::NoisyBackend;
pub use prompt::PromptTemplates;
pub use remote::{RemoteBackend, RemoteConfig, API_KEY_VAR};
pub use symbolic::SymbolicBackend;

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::FactSet;
use crate::lang::{Fact, Rule, Task};

/// What a call was for; recorded on every [`BackendCall`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallRole {
    RelevanceJudgment,
    ForwardReasoning,
    DirectAnswer,
    CotAnswer,
}

/// What could be extracted from a raw response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ParsedAnswer {
    Verdict(bool),
    /// Zero-based indices into the item list the call was about.
    KeptItems(BTreeSet<usize>),
    /// Nothing usable found; the raw text stays on the call for audit.
    Unparseable,
}

/// One backend invocation, kept verbatim for traceability.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCall {
    pub role: CallRole,
    pub prompt: String,
    pub raw_response: String,
    pub parsed: ParsedAnswer,
    pub latency_ms: u64,
    /// Transport attempts consumed (1 unless retries happened).
    pub attempt: u32,
}

/// The backend could not produce a response.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {reason}")]
    Unavailable { attempts: u32, reason: String },
}

/// One line of a relevance judgment: a premise or a rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelevanceItem {
    Premise(Fact),
    Rule(Rule),
}

impl fmt::Display for RelevanceItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelevanceItem::Premise(fact) => fact.fmt(f),
            RelevanceItem::Rule(rule) => rule.fmt(f),
        }
    }
}

/// Question style for the direct (reverse-direction) baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectStyle {
    Io,
    ZeroShotCot,
}

/// The structured question behind a prompt.
///
/// Remote backends look only at the rendered prompt; the symbolic and noisy
/// backends answer from this structure. `Relevance::ask` selects per-item
/// mode: `None` judges the whole list in one call, `Some(i)` asks about item
/// `i` alone (the prompt then shows just that item, numbered 1).
#[derive(Debug, Clone)]
pub enum BackendRequest<'a> {
    Relevance { items: &'a [RelevanceItem], ask: Option<usize>, phenomenon: &'a Fact },
    Forward { premises: &'a FactSet, rules: &'a [Rule], phenomenon: &'a Fact },
    Direct { task: &'a Task, style: DirectStyle },
}

/// A raw response plus how many transport attempts it took.
#[derive(Debug, Clone)]
pub struct BackendReply {
    pub text: String,
    pub attempts: u32,
}

/// Something that can answer a rendered prompt.
pub trait Backend: Send + Sync {
    fn respond(&self, request: &BackendRequest<'_>, prompt: &str)
        -> Result<BackendReply, BackendError>;

    /// Short human-readable identity for manifests ("symbolic",
    /// "noisy(p=0.1)", "remote(model=...)").
    fn describe(&self) -> String;
}

/// Runs one call end to end: render, send, parse, record.
fn call(
    backend: &dyn Backend,
    role: CallRole,
    request: &BackendRequest<'_>,
    prompt: String,
    parse: impl FnOnce(&str) -> ParsedAnswer,
) -> BackendCall {
    let started = Instant::now();
    let outcome = backend.respond(request, &prompt);
    let latency_ms = started.elapsed().as_millis() as u64;
    match outcome {
        Ok(reply) => {
            let parsed = parse(&reply.text);
            BackendCall { role, prompt, raw_response: reply.text, parsed, latency_ms, attempt: reply.attempts }
        }
        Err(BackendError::Unavailable { attempts, reason }) => BackendCall {
            role,
            prompt,
            raw_response: format!("<unavailable: {reason}>"),
            parsed: ParsedAnswer::Unparseable,
            latency_ms,
            attempt: attempts,
        },
    }
}

/// Asks which of `items` matter for deriving `phenomenon`, in one batched
/// call. Returns the kept zero-based indices, or `None` when the reply was
/// unusable (callers fall back to keeping everything).
pub fn judge_relevance(
    backend: &dyn Backend,
    templates: &PromptTemplates,
    items: &[RelevanceItem],
    phenomenon: &Fact,
) -> (Option<BTreeSet<usize>>, BackendCall) {
    debug_assert!(!items.is_empty(), "relevance judgment over an empty item list");
    let request = BackendRequest::Relevance { items, ask: None, phenomenon };
    let prompt = templates.render_relevance(items, phenomenon);
    let record = call(backend, CallRole::RelevanceJudgment, &request, prompt, |text| {
        match answer::parse_kept_items(text, items.len()) {
            Some(kept) => ParsedAnswer::KeptItems(kept),
            None => ParsedAnswer::Unparseable,
        }
    });
    let kept = match &record.parsed {
        ParsedAnswer::KeptItems(kept) => Some(kept.clone()),
        _ => None,
    };
    (kept, record)
}

/// Asks about a single item of `items` (per-item judgment mode). Returns
/// whether the item should be kept, or `None` when the reply was unusable.
pub fn judge_relevance_item(
    backend: &dyn Backend,
    templates: &PromptTemplates,
    items: &[RelevanceItem],
    index: usize,
    phenomenon: &Fact,
) -> (Option<bool>, BackendCall) {
    let request = BackendRequest::Relevance { items, ask: Some(index), phenomenon };
    let prompt = templates.render_relevance_item(&items[index], phenomenon);
    let record = call(backend, CallRole::RelevanceJudgment, &request, prompt, |text| {
        // The prompt shows one item numbered 1, so valid replies are "1" or
        // "none" — the same list shape as the batched call.
        match answer::parse_kept_items(text, 1) {
            Some(kept) => ParsedAnswer::KeptItems(kept),
            None => ParsedAnswer::Unparseable,
        }
    });
    let keep = match &record.parsed {
        ParsedAnswer::KeptItems(kept) => Some(kept.contains(&0)),
        _ => None,
    };
    (keep, record)
}

/// Asks whether `phenomenon` can be derived from the given facts and rules
/// (forward direction).
pub fn reason_forward(
    backend: &dyn Backend,
    templates: &PromptTemplates,
    premises: &FactSet,
    rules: &[Rule],
    phenomenon: &Fact,
) -> (Option<bool>, BackendCall) {
    let request = BackendRequest::Forward { premises, rules, phenomenon };
    let prompt = templates.render_forward(premises, rules, phenomenon);
    let record = call(backend, CallRole::ForwardReasoning, &request, prompt, |text| {
        match answer::parse_verdict(text) {
            Some(v) => ParsedAnswer::Verdict(v),
            None => ParsedAnswer::Unparseable,
        }
    });
    let verdict = match &record.parsed {
        ParsedAnswer::Verdict(v) => Some(*v),
        _ => None,
    };
    (verdict, record)
}

/// Poses the original reverse-direction question: does the possible cause
/// explain the phenomenon? `ZeroShotCot` uses the template with the
/// "Let's think step by step" trigger.
pub fn answer_direct(
    backend: &dyn Backend,
    templates: &PromptTemplates,
    task: &Task,
    style: DirectStyle,
) -> (Option<bool>, BackendCall) {
    let request = BackendRequest::Direct { task, style };
    let prompt = templates.render_direct(task, style);
    let role = match style {
        DirectStyle::Io => CallRole::DirectAnswer,
        DirectStyle::ZeroShotCot => CallRole::CotAnswer,
    };
    let record = call(backend, role, &request, prompt, |text| match answer::parse_verdict(text) {
        Some(v) => ParsedAnswer::Verdict(v),
        None => ParsedAnswer::Unparseable,
    });
    let verdict = match &record.parsed {
        ParsedAnswer::Verdict(v) => Some(*v),
        _ => None,
    };
    (verdict, record)
}
