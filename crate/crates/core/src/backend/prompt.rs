//! Prompt templates and rendering.
//!
//! The exact wording sent to a model materially affects results, so it is
//! not hardcoded: templates are plain text files with named placeholders
//! ({items}, {premises}, {rules}, {phenomenon}, {cause}), shipped with
//! defaults and overridable per experiment from a directory. Every
//! experiment manifest embeds the SHA-256 of each template actually used, so
//! a report can always be traced back to its wording.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::engine::FactSet;
use crate::lang::{Fact, Rule, Task};

use super::{DirectStyle, RelevanceItem};

const DEFAULT_RELEVANCE: &str = include_str!("../../templates/relevance.txt");
const DEFAULT_FORWARD: &str = include_str!("../../templates/forward.txt");
const DEFAULT_DIRECT_IO: &str = include_str!("../../templates/direct_io.txt");
const DEFAULT_DIRECT_COT: &str = include_str!("../../templates/direct_cot.txt");

/// The four prompt texts used by the pipeline.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    relevance: String,
    forward: String,
    direct_io: String,
    direct_cot: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::defaults()
    }
}

impl PromptTemplates {
    /// The built-in wording (the files under `templates/`, embedded at
    /// compile time).
    pub fn defaults() -> Self {
        PromptTemplates {
            relevance: DEFAULT_RELEVANCE.to_string(),
            forward: DEFAULT_FORWARD.to_string(),
            direct_io: DEFAULT_DIRECT_IO.to_string(),
            direct_cot: DEFAULT_DIRECT_COT.to_string(),
        }
    }

    /// Loads `relevance.txt`, `forward.txt`, `direct_io.txt`, and
    /// `direct_cot.txt` from a directory.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        Ok(PromptTemplates {
            relevance: fs::read_to_string(dir.join("relevance.txt"))?,
            forward: fs::read_to_string(dir.join("forward.txt"))?,
            direct_io: fs::read_to_string(dir.join("direct_io.txt"))?,
            direct_cot: fs::read_to_string(dir.join("direct_cot.txt"))?,
        })
    }

    /// SHA-256 of each template, keyed by template name — what experiment
    /// manifests embed.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        let digest = |text: &str| hex::encode(Sha256::digest(text.as_bytes()));
        BTreeMap::from([
            ("relevance".to_string(), digest(&self.relevance)),
            ("forward".to_string(), digest(&self.forward)),
            ("direct_io".to_string(), digest(&self.direct_io)),
            ("direct_cot".to_string(), digest(&self.direct_cot)),
        ])
    }

    /// The batched relevance question: all items, numbered from 1.
    pub fn render_relevance(&self, items: &[RelevanceItem], phenomenon: &Fact) -> String {
        self.relevance
            .replace("{items}", &numbered(items.iter()))
            .replace("{phenomenon}", &phenomenon.to_string())
    }

    /// The per-item relevance question: one item, shown as number 1.
    pub fn render_relevance_item(&self, item: &RelevanceItem, phenomenon: &Fact) -> String {
        self.relevance
            .replace("{items}", &format!("1. {item}"))
            .replace("{phenomenon}", &phenomenon.to_string())
    }

    /// The forward-reasoning question over a (possibly pruned) problem.
    pub fn render_forward(&self, premises: &FactSet, rules: &[Rule], phenomenon: &Fact) -> String {
        self.forward
            .replace("{premises}", &numbered(premises.iter()))
            .replace("{rules}", &numbered(rules.iter()))
            .replace("{phenomenon}", &phenomenon.to_string())
    }

    /// The reverse-direction question as the task poses it.
    pub fn render_direct(&self, task: &Task, style: DirectStyle) -> String {
        let template = match style {
            DirectStyle::Io => &self.direct_io,
            DirectStyle::ZeroShotCot => &self.direct_cot,
        };
        template
            .replace("{premises}", &numbered(task.premises.iter()))
            .replace("{rules}", &numbered(task.rules.iter()))
            .replace("{phenomenon}", &task.phenomenon.to_string())
            .replace("{cause}", &task.possible_cause.to_string())
    }
}

/// "1. ...\n2. ..." — or a placeholder line when the list is empty, so a
/// prompt never shows a dangling header.
fn numbered<T: ToString>(items: impl Iterator<Item = T>) -> String {
    let lines: Vec<String> =
        items.enumerate().map(|(i, item)| format!("{}. {}", i + 1, item.to_string())).collect();
    if lines.is_empty() {
        "(none)".to_string()
    } else {
        lines.join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_premise, parse_rule, parse_task, SAMPLE_TASK_DOC};

    #[test]
    fn relevance_prompt_numbers_facts_then_rules() {
        let items = vec![
            RelevanceItem::Premise(parse_premise("Anne is responsible").unwrap()),
            RelevanceItem::Rule(
                parse_rule("If a person is lazy then this person is beautiful.").unwrap(),
            ),
        ];
        let goal = parse_premise("Anne is trustworthy").unwrap();
        let prompt = PromptTemplates::defaults().render_relevance(&items, &goal);
        assert!(prompt.contains("1. Anne is responsible"));
        assert!(prompt.contains("2. If a person is lazy then this person is beautiful."));
        assert!(prompt.contains("Target phenomenon: Anne is trustworthy"));
        assert!(!prompt.contains('{'), "all placeholders substituted");
    }

    #[test]
    fn cot_template_carries_the_verbatim_trigger() {
        let task = parse_task(SAMPLE_TASK_DOC).unwrap();
        let templates = PromptTemplates::defaults();
        let cot = templates.render_direct(&task, DirectStyle::ZeroShotCot);
        assert!(cot.contains("Let's think step by step"));
        let io = templates.render_direct(&task, DirectStyle::Io);
        assert!(!io.contains("Let's think step by step"));
        for prompt in [&cot, &io] {
            assert!(prompt.contains("Phenomenon: Anne is trustworthy"));
            assert!(prompt.contains("Possible cause: Anne is excited"));
            assert!(!prompt.contains('{'));
        }
    }

    #[test]
    fn forward_prompt_handles_empty_rule_lists() {
        let premises: FactSet = [parse_premise("Anne is calm").unwrap()].into_iter().collect();
        let goal = parse_premise("Anne is calm").unwrap();
        let prompt = PromptTemplates::defaults().render_forward(&premises, &[], &goal);
        assert!(prompt.contains("(none)"));
    }

    #[test]
    fn hashes_cover_all_four_templates_and_track_content() {
        let defaults = PromptTemplates::defaults();
        let hashes = defaults.hashes();
        assert_eq!(hashes.len(), 4);
        for key in ["relevance", "forward", "direct_io", "direct_cot"] {
            assert_eq!(hashes[key].len(), 64);
        }
        let mut changed = defaults.clone();
        changed.forward.push('x');
        assert_ne!(changed.hashes()["forward"], hashes["forward"]);
        assert_eq!(changed.hashes()["relevance"], hashes["relevance"]);
    }

    #[test]
    fn from_dir_round_trips_the_defaults() {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in [
            ("relevance.txt", DEFAULT_RELEVANCE),
            ("forward.txt", DEFAULT_FORWARD),
            ("direct_io.txt", DEFAULT_DIRECT_IO),
            ("direct_cot.txt", DEFAULT_DIRECT_COT),
        ] {
            std::fs::write(dir.path().join(name), text).unwrap();
        }
        let loaded = PromptTemplates::from_dir(dir.path()).unwrap();
        assert_eq!(loaded.hashes(), PromptTemplates::defaults().hashes());
    }
}
