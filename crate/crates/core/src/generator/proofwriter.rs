//! Import of ProofWriter-style abduction records as positive decision tasks.
//!
//! Input is JSON lines. Each record carries a `theory` — period-separated
//! sentences, each either a premise or a rule in the task grammar — plus the
//! goal under `phenomenon` (or `question`) and the missing fact under
//! `abducible`. The record becomes a [`Task`] labeled `True` whose possible
//! cause is the abducible; the engine must confirm the goal is derivable
//! once the abducible is added, or the record is skipped.
//!
//! Anything outside the supported fragment is skipped with a reason and
//! tallied, never fatal: negated sentences, sentences that do not parse,
//! subject mismatches, duplicates, abducibles that are already premises,
//! and records whose goal stays underivable. When the minimal proof is a
//! single chain the importer also reconstructs full ground truth (level,
//! chain, relevance sets); branching proofs leave `Meta` unset.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::Value;

use crate::engine::{min_proof, relevance_slice, FactSet, ProofNode, ProofTree};
use crate::lang::{parse_premise, parse_rule, Fact, GroundTruth, Rule, Task};

/// Outcome of one import run.
#[derive(Debug, Clone, Default)]
pub struct ImportReport {
    /// Tasks that parsed and passed engine verification, in input order.
    pub tasks: Vec<Task>,
    /// Rejected records with the line they came from.
    pub skipped: Vec<SkippedRecord>,
}

impl ImportReport {
    /// Records seen, kept or not.
    pub fn total(&self) -> usize {
        self.tasks.len() + self.skipped.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    /// 1-based line number in the input file.
    pub line: usize,
    pub reason: String,
}

/// Reads a ProofWriter-style JSONL file. I/O failures on the file itself
/// are the only fatal errors; every record-level problem lands in
/// [`ImportReport::skipped`].
pub fn import_proofwriter(path: &Path) -> Result<ImportReport, std::io::Error> {
    let reader = BufReader::new(File::open(path)?);
    let mut report = ImportReport::default();
    for (at, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match convert_record(&line) {
            Ok(task) => report.tasks.push(task),
            Err(reason) => report.skipped.push(SkippedRecord { line: at + 1, reason }),
        }
    }
    Ok(report)
}

/// Converts one record or explains why it cannot be.
fn convert_record(line: &str) -> Result<Task, String> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let theory = field(&value, &["theory"])?;
    let goal_text = field(&value, &["phenomenon", "question"])?;
    let abducible_text = field(&value, &["abducible"])?;

    let mut premises: Vec<Fact> = Vec::new();
    let mut rules: Vec<Rule> = Vec::new();
    for sentence in theory.split('.').map(str::trim).filter(|s| !s.is_empty()) {
        reject_negation(sentence)?;
        if sentence.starts_with("If ") {
            let rule = parse_rule(sentence).map_err(|e| format!("grammar: {e}"))?;
            if rules.contains(&rule) {
                return Err(format!("duplicate sentence: {rule}"));
            }
            rules.push(rule);
        } else {
            let fact = parse_premise(sentence).map_err(|e| format!("grammar: {e}"))?;
            if premises.contains(&fact) {
                return Err(format!("duplicate sentence: {fact}"));
            }
            premises.push(fact);
        }
    }

    reject_negation(goal_text)?;
    reject_negation(abducible_text)?;
    let phenomenon = parse_premise(goal_text).map_err(|e| format!("grammar: {e}"))?;
    let possible_cause = parse_premise(abducible_text).map_err(|e| format!("grammar: {e}"))?;
    if phenomenon.entity != possible_cause.entity {
        return Err(format!(
            "entity mismatch: goal is about {} but the abducible is about {}",
            phenomenon.entity, possible_cause.entity
        ));
    }
    if phenomenon == possible_cause {
        return Err("abducible equals phenomenon".to_string());
    }
    if premises.contains(&possible_cause) {
        return Err(format!("abducible already given: {possible_cause}"));
    }

    let mut pstar: FactSet = premises.iter().cloned().collect();
    pstar.insert(possible_cause.clone());
    let Some(proof) = min_proof(&pstar, &rules, &phenomenon) else {
        return Err("not provable with the abducible".to_string());
    };
    let meta = ground_truth_for(&proof, &premises, &possible_cause, &pstar, &rules, &phenomenon);

    Ok(Task {
        premises,
        rules,
        phenomenon,
        possible_cause,
        label: true,
        meta,
        extra: Default::default(),
    })
}

fn field<'a>(value: &'a Value, names: &[&str]) -> Result<&'a str, String> {
    names
        .iter()
        .find_map(|n| value.get(n).and_then(Value::as_str))
        .ok_or_else(|| format!("malformed record: missing string key {:?}", names[0]))
}

fn reject_negation(sentence: &str) -> Result<(), String> {
    if sentence.split_whitespace().any(|w| w.eq_ignore_ascii_case("not")) {
        return Err(format!("negation unsupported: {sentence}"));
    }
    Ok(())
}

/// Ground truth from the engine, when the proof is a single chain; the
/// chain field has no faithful encoding for branching proofs, so those
/// tasks carry no Meta.
fn ground_truth_for(
    proof: &ProofTree,
    premises: &[Fact],
    possible_cause: &Fact,
    pstar: &FactSet,
    rules: &[Rule],
    phenomenon: &Fact,
) -> Option<GroundTruth> {
    let chain = linear_chain(proof)?;
    if chain.is_empty() {
        // Depth 0: the goal was already a fact; no reasoning to describe.
        return None;
    }
    let slice = relevance_slice(pstar, rules, phenomenon).ok()?;
    let relevant_premises: BTreeSet<usize> = premises
        .iter()
        .enumerate()
        .filter(|(_, fact)| slice.facts.contains(fact))
        .map(|(i, _)| i)
        .collect();
    Some(GroundTruth {
        level: proof.depth,
        chain,
        relevant_premises,
        hypothesis_relevant: slice.facts.contains(possible_cause),
        relevant_rules: slice.rule_indices,
    })
}

/// Rule indices along a non-branching proof, in application order; `None`
/// when any step derives more than one antecedent.
fn linear_chain(tree: &ProofTree) -> Option<Vec<usize>> {
    let mut chain = Vec::new();
    let mut node = &tree.node;
    loop {
        match node {
            ProofNode::Base => break,
            ProofNode::Derived { rule_index, children, .. } => {
                chain.push(*rule_index);
                let mut derived =
                    children.iter().filter(|c| matches!(c.node, ProofNode::Derived { .. }));
                match (derived.next(), derived.next()) {
                    (None, _) => break,
                    (Some(child), None) => node = &child.node,
                    (Some(_), Some(_)) => return None,
                }
            }
        }
    }
    chain.reverse();
    Some(chain)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;
    use crate::engine::derives;
    use crate::generator::validate_task;

    fn import_lines(lines: &[&str]) -> ImportReport {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(file, "{line}").unwrap();
        }
        import_proofwriter(file.path()).unwrap()
    }

    #[test]
    fn one_step_record_becomes_a_verified_positive_task() {
        let report = import_lines(&[concat!(
            r#"{"theory": "Anne is responsible. If a person is responsible and excited "#,
            r#"then this person is trustworthy.", "phenomenon": "Anne is trustworthy", "#,
            r#""abducible": "Anne is excited"}"#
        )]);
        assert!(report.skipped.is_empty(), "{:?}", report.skipped);
        let task = &report.tasks[0];
        assert!(task.label);
        assert_eq!(task.possible_cause.to_string(), "Anne is excited");
        let gt = task.meta.as_ref().unwrap();
        assert_eq!(gt.level, 1);
        assert_eq!(gt.chain, vec![0]);
        assert_eq!(gt.relevant_premises, [0].into());
        assert!(gt.hypothesis_relevant);
        assert!(validate_task(task).is_ok());
    }

    #[test]
    fn question_key_is_accepted_for_the_goal() {
        let report = import_lines(&[concat!(
            r#"{"theory": "If a person is lazy then this person is beautiful.", "#,
            r#""question": "Justin is beautiful", "abducible": "Justin is lazy"}"#
        )]);
        assert_eq!(report.tasks.len(), 1);
        assert_eq!(report.tasks[0].meta.as_ref().unwrap().level, 1);
    }

    #[test]
    fn unsupported_records_are_skipped_with_reasons() {
        let cases = [
            (
                r#"{"theory": "Anne is not happy.", "phenomenon": "Anne is happy", "abducible": "Anne is calm"}"#,
                "negation unsupported",
            ),
            (
                r#"{"theory": "Anne is happy", "phenomenon": "Anne is happy", "abducible": "Bob is calm"}"#,
                "entity mismatch",
            ),
            (
                r#"{"theory": "Anne is calm", "phenomenon": "Anne is happy", "abducible": "Anne is calm"}"#,
                "abducible already given",
            ),
            (
                r#"{"theory": "Anne is calm", "phenomenon": "Anne is happy", "abducible": "Anne is brave"}"#,
                "not provable",
            ),
            (
                r#"{"theory": "The weather is nice.", "phenomenon": "Anne is happy", "abducible": "Anne is calm"}"#,
                "grammar",
            ),
            (r#"{"theory": 7}"#, "malformed record"),
            ("not json at all", "malformed record"),
            (
                r#"{"theory": "Anne is calm. Anne is calm", "phenomenon": "Anne is happy", "abducible": "Anne is brave"}"#,
                "duplicate sentence",
            ),
            (
                r#"{"theory": "", "phenomenon": "Anne is happy", "abducible": "Anne is happy"}"#,
                "abducible equals phenomenon",
            ),
        ];
        let report = import_lines(&cases.map(|(line, _)| line));
        assert!(report.tasks.is_empty());
        assert_eq!(report.skipped.len(), cases.len());
        for (skipped, (_, want)) in report.skipped.iter().zip(cases) {
            assert!(
                skipped.reason.starts_with(want),
                "line {}: got {:?}, want prefix {want:?}",
                skipped.line,
                skipped.reason
            );
        }
    }

    #[test]
    fn every_imported_task_is_derivable_with_its_abducible() {
        let report = import_lines(&[
            concat!(
                r#"{"theory": "If a person is brave then this person is calm. "#,
                r#"If a person is calm then this person is happy.", "#,
                r#""phenomenon": "Bob is happy", "abducible": "Bob is brave"}"#
            ),
            concat!(
                r#"{"theory": "If a person is witty then this person is smart.", "#,
                r#""phenomenon": "Carol is smart", "abducible": "Carol is witty"}"#
            ),
        ]);
        assert_eq!(report.tasks.len(), 2);
        assert_eq!(report.total(), 2);
        for task in &report.tasks {
            let mut pstar: FactSet = task.premises.iter().cloned().collect();
            pstar.insert(task.possible_cause.clone());
            assert!(derives(&pstar, &task.rules, &task.phenomenon));
            assert!(validate_task(task).is_ok());
        }
    }

    #[test]
    fn abducible_already_premise_goal_still_checked() {
        // "Bob is brave" is a premise, so the abducible must be something
        // else; a two-antecedent rule with one derived and one given branch
        // still yields a linear chain.
        let report = import_lines(&[concat!(
            r#"{"theory": "Bob is brave. If a person is eager then this person is calm. "#,
            r#"If a person is calm and brave then this person is happy.", "#,
            r#""phenomenon": "Bob is happy", "abducible": "Bob is eager"}"#
        )]);
        assert_eq!(report.tasks.len(), 1, "{:?}", report.skipped);
        let gt = report.tasks[0].meta.as_ref().unwrap();
        assert_eq!(gt.level, 2);
        assert_eq!(gt.chain, vec![0, 1]);
        assert!(validate_task(&report.tasks[0]).is_ok());
    }

    #[test]
    fn branching_proofs_import_without_ground_truth() {
        // Both antecedents of the final rule are themselves derived, so the
        // proof is a tree, not a chain.
        let report = import_lines(&[concat!(
            r#"{"theory": "Bob is brave. If a person is brave then this person is calm. "#,
            r#"If a person is eager then this person is witty. "#,
            r#"If a person is calm and witty then this person is happy.", "#,
            r#""phenomenon": "Bob is happy", "abducible": "Bob is eager"}"#
        )]);
        assert_eq!(report.tasks.len(), 1, "{:?}", report.skipped);
        let task = &report.tasks[0];
        assert!(task.meta.is_none());
        assert!(task.label);
        assert!(validate_task(task).is_ok());
    }
}
