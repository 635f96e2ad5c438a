//! The exact oracle backend, answering from the inference engine.
//!
//! It exists so every moving part above the engine — prompt plumbing, answer
//! parsing, pruning, call accounting, scoring — can be exercised end to end
//! with a reasoner that is provably right. Its replies use the same textual
//! shapes a remote model is asked for ("True"/"False", "1, 3, 14"/"none") and
//! go through the ordinary parsers, so the plumbing is tested for real.

use std::collections::BTreeSet;

use crate::engine::{self, FactSet};
use crate::lang::{Fact, Rule};

use super::{Backend, BackendError, BackendReply, BackendRequest, RelevanceItem};

/// Answers every request exactly, via the engine. Stateless and pure.
#[derive(Debug, Clone, Copy, Default)]
pub struct SymbolicBackend;

/// The exact relevance decision over a full item list: the indices of the
/// minimal proof's support, or — when the phenomenon is not derivable from
/// the items at all — every index, since nothing can be shown irrelevant to
/// an unreachable goal and keeping everything is the conservative answer.
pub(super) fn oracle_kept_indices(items: &[RelevanceItem], phenomenon: &Fact) -> BTreeSet<usize> {
    let mut facts = FactSet::new();
    let mut rules: Vec<Rule> = Vec::new();
    let mut rule_item_positions: Vec<usize> = Vec::new();
    for (position, item) in items.iter().enumerate() {
        match item {
            RelevanceItem::Premise(fact) => {
                facts.insert(fact.clone());
            }
            RelevanceItem::Rule(rule) => {
                rules.push(rule.clone());
                rule_item_positions.push(position);
            }
        }
    }
    match engine::relevance_slice(&facts, &rules, phenomenon) {
        Ok(slice) => {
            let mut kept = BTreeSet::new();
            for (position, item) in items.iter().enumerate() {
                if let RelevanceItem::Premise(fact) = item {
                    if slice.facts.contains(fact) {
                        kept.insert(position);
                    }
                }
            }
            for rule_index in &slice.rule_indices {
                kept.insert(rule_item_positions[*rule_index]);
            }
            kept
        }
        Err(_) => (0..items.len()).collect(),
    }
}

/// Renders a kept-index set the way the prompts ask for it: 1-based,
/// comma-separated, or "none".
pub(super) fn render_kept(kept: &BTreeSet<usize>) -> String {
    if kept.is_empty() {
        return "none".to_string();
    }
    kept.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(", ")
}

impl Backend for SymbolicBackend {
    fn respond(
        &self,
        request: &BackendRequest<'_>,
        _prompt: &str,
    ) -> Result<BackendReply, BackendError> {
        let text = match request {
            BackendRequest::Relevance { items, ask, phenomenon } => {
                let kept = oracle_kept_indices(items, phenomenon);
                match ask {
                    // Per-item question: the prompt shows this item as "1".
                    Some(index) => {
                        if kept.contains(index) {
                            "1".to_string()
                        } else {
                            "none".to_string()
                        }
                    }
                    None => render_kept(&kept),
                }
            }
            BackendRequest::Forward { premises, rules, phenomenon } => {
                verdict_text(engine::derives(premises, rules, phenomenon))
            }
            BackendRequest::Direct { task, style: _ } => {
                // A perfect reasoner's answer to the reverse question: does
                // the union of premises and cause yield the phenomenon?
                let mut augmented: FactSet = task.premises.iter().cloned().collect();
                augmented.insert(task.possible_cause.clone());
                verdict_text(engine::derives(&augmented, &task.rules, &task.phenomenon))
            }
        };
        Ok(BackendReply { text, attempts: 1 })
    }

    fn describe(&self) -> String {
        "symbolic".to_string()
    }
}

fn verdict_text(verdict: bool) -> String {
    if verdict { "True" } else { "False" }.to_string()
}
