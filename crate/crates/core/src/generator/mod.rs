//! CauseLogics-style dataset generation with engine-verified ground truth.
//!
//! Every task is built around a single subject entity and a preset reasoning
//! chain: rule r₁ consumes the hypothesis attribute (plus base premises as
//! needed), each later rule consumes its predecessor's consequent, and the
//! final consequent is the phenomenon. Difficulty is the chain length
//! (`level`, 1–4). Around that skeleton the generator plants interference:
//! facts about other entities and distractor rules whose consequents can
//! never reach the phenomenon. Negative tasks keep the full scaffolding but
//! swap the possible cause for an attribute no rule consumes, so surface
//! shape carries no label signal.
//!
//! Nothing is emitted on trust. Before a task leaves [`generate_task`] the
//! inference engine confirms the label, the hypothesis's necessity, the
//! exact proof depth, and the stored relevance ground truth; a failed
//! candidate is rebuilt under a perturbed sub-seed. [`validate_task`]
//! re-runs the same integrity checks on any task, wherever it came from.

pub mod proofwriter;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{derives, min_proof, relevance_slice, FactSet};
use crate::lang::{parse_premise, parse_rule, serialize_task, Attribute, Entity, Fact, GroundTruth, Rule, Task};

/// Candidates rebuilt per index before generation is declared stalled.
const MAX_RETRIES: u32 = 16;

/// Everything that shapes one generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Reasoning chain length of every task (1–4).
    pub level: u32,
    /// Number of tasks to emit.
    pub count: usize,
    /// Master seed; tasks are deterministic in `(seed, index)`.
    pub seed: u64,
    /// Share of positive labels, met as an exact quota (not sampled).
    pub positive_fraction: f64,
    /// Facts about non-subject entities planted per task.
    pub irrelevant_premises: usize,
    /// Facts the derivation consumes, counting the hypothesis itself.
    pub relevant_premises: usize,
    /// Rules whose consequents never reach the phenomenon.
    pub distractor_rules: usize,
    pub entity_pool: Vec<Entity>,
    pub attribute_pool: Vec<Attribute>,
}

impl GeneratorConfig {
    /// Standard configuration for a difficulty level: 12 irrelevant and 2
    /// relevant premises at levels 1–2, 16 and 3 at levels 3–4, 4 distractor
    /// rules, balanced labels, default vocabularies.
    pub fn for_level(level: u32, count: usize, seed: u64) -> Self {
        let (irrelevant, relevant) = if level <= 2 { (12, 2) } else { (16, 3) };
        GeneratorConfig {
            level,
            count,
            seed,
            positive_fraction: 0.5,
            irrelevant_premises: irrelevant,
            relevant_premises: relevant,
            distractor_rules: 4,
            entity_pool: default_entity_pool(),
            attribute_pool: default_attribute_pool(),
        }
    }

    /// Distinct attributes one task consumes: chain consequents, hypothesis,
    /// base premises, distractor consequents, and the negative-label
    /// replacement attribute.
    fn distinct_attributes_needed(&self) -> usize {
        self.level as usize + 1 + (self.relevant_premises.saturating_sub(1)) + self.distractor_rules + 1
    }

    /// Checks every invariant the construction relies on.
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if !(1..=4).contains(&self.level) {
            return Err(GeneratorError::InvalidConfig(format!(
                "level must be 1-4, got {}",
                self.level
            )));
        }
        if !self.positive_fraction.is_finite() || !(0.0..=1.0).contains(&self.positive_fraction) {
            return Err(GeneratorError::InvalidConfig(format!(
                "positive_fraction must lie in [0, 1], got {}",
                self.positive_fraction
            )));
        }
        if self.relevant_premises == 0 {
            return Err(GeneratorError::InvalidConfig(
                "relevant_premises counts the hypothesis and must be at least 1".to_string(),
            ));
        }
        // r₁ absorbs the hypothesis plus one base attribute; each later
        // chain rule absorbs at most one more.
        if self.relevant_premises > self.level as usize + 1 {
            return Err(GeneratorError::InvalidConfig(format!(
                "a {}-rule chain can consume at most {} relevant premises, got {}",
                self.level,
                self.level + 1,
                self.relevant_premises
            )));
        }
        for (name, len, distinct) in [
            ("entity", self.entity_pool.len(), self.entity_pool.iter().collect::<BTreeSet<_>>().len()),
            (
                "attribute",
                self.attribute_pool.len(),
                self.attribute_pool.iter().collect::<BTreeSet<_>>().len(),
            ),
        ] {
            if len == 0 {
                return Err(GeneratorError::InvalidConfig(format!("{name} pool is empty")));
            }
            if distinct != len {
                return Err(GeneratorError::InvalidConfig(format!(
                    "{name} pool contains duplicates"
                )));
            }
        }
        let needed = self.distinct_attributes_needed();
        if needed > self.attribute_pool.len() {
            return Err(GeneratorError::VocabularyExhausted {
                pool: "attribute",
                needed,
                available: self.attribute_pool.len(),
            });
        }
        if self.irrelevant_premises > 0 {
            let capacity = (self.entity_pool.len() - 1) * self.attribute_pool.len();
            if capacity < self.irrelevant_premises {
                return Err(GeneratorError::VocabularyExhausted {
                    pool: "non-subject entity/attribute",
                    needed: self.irrelevant_premises,
                    available: capacity,
                });
            }
        }
        Ok(())
    }

    /// Exact number of positive labels the dataset will carry.
    pub fn positive_quota(&self) -> usize {
        (self.count as f64 * self.positive_fraction).round() as usize
    }
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("{pool} pool too small: need {needed}, have {available}")]
    VocabularyExhausted { pool: &'static str, needed: usize, available: usize },
    #[error("no verifiable task at index {index} after {retries} rebuilds")]
    GenerationStalled { index: usize, retries: u32 },
    /// `record` is the index being written when the failure hit; file
    /// creation reports record 0 and manifest writing reports `count`.
    #[error("i/o failure near record {record}: {source}")]
    Io {
        record: usize,
        #[source]
        source: std::io::Error,
    },
}

/// Person names for subjects and bystanders; the first few echo the dataset
/// samples this format imitates.
pub fn default_entity_pool() -> Vec<Entity> {
    [
        "Anne", "Bob", "Carol", "Justin", "David", "Emma", "Frank", "Grace", "Henry", "Irene",
        "Jack", "Karen", "Leo", "Mary", "Nathan", "Olivia", "Peter", "Quinn", "Rachel", "Steve",
        "Tina", "Victor", "Wendy", "Yvonne",
    ]
    .into_iter()
    .map(|name| Entity::new(name).expect("default entity names are valid"))
    .collect()
}

/// Personality adjectives used for every attribute role.
pub fn default_attribute_pool() -> Vec<Attribute> {
    [
        "responsible", "excited", "trustworthy", "humorous", "loyal", "strange", "quiet", "happy",
        "creative", "patient", "lazy", "beautiful", "enthusiastic", "generous", "witty", "calm",
        "brave", "careful", "cheerful", "curious", "diligent", "eager", "faithful", "friendly",
        "gentle", "graceful", "helpful", "honest", "hopeful", "kind", "lively", "modest", "neat",
        "optimistic", "polite", "proud", "reliable", "sensible", "serious", "shy", "sincere",
        "smart", "thoughtful", "tidy", "upbeat", "warm", "wise", "youthful",
    ]
    .into_iter()
    .map(|name| Attribute::new(name).expect("default attributes are valid"))
    .collect()
}

/// Whether task `index` gets a positive label: quotas are spread evenly so
/// every prefix of the dataset is as balanced as the whole.
fn positive_at(count: usize, quota: usize, index: usize) -> bool {
    let (n, p, i) = (count as u128, quota as u128, index as u128);
    (i + 1) * p / n > i * p / n
}

/// Sub-seeded RNG: deterministic in `(seed, index)` and decorrelated across
/// retries.
fn task_rng(seed: u64, index: usize, retry: u32) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"causelogics-task");
    hasher.update(seed.to_le_bytes());
    hasher.update((index as u64).to_le_bytes());
    hasher.update(retry.to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Builds the task at `index`, deterministic in `(config.seed, index)`.
///
/// The emitted task has passed every engine check: the label matches
/// derivability of the phenomenon from `P ∪ {hyp}`, positive tasks need the
/// hypothesis and prove at exactly `level` steps, the stored ground truth
/// matches the engine's relevance slice, and stripping all interference
/// leaves derivability unchanged.
pub fn generate_task(config: &GeneratorConfig, index: usize) -> Result<Task, GeneratorError> {
    config.validate()?;
    if index >= config.count {
        return Err(GeneratorError::InvalidConfig(format!(
            "index {index} out of range for count {}",
            config.count
        )));
    }
    let positive = positive_at(config.count, config.positive_quota(), index);
    for retry in 0..MAX_RETRIES {
        let task = build_candidate(config, index, retry, positive);
        if verify(config, &task) {
            return Ok(task);
        }
    }
    Err(GeneratorError::GenerationStalled { index, retries: MAX_RETRIES })
}

/// One unverified candidate. All vocabulary arithmetic is guarded by
/// [`GeneratorConfig::validate`].
fn build_candidate(config: &GeneratorConfig, index: usize, retry: u32, positive: bool) -> Task {
    let mut rng = task_rng(config.seed, index, retry);
    let level = config.level as usize;
    let base_count = config.relevant_premises - 1;

    let subject_at = rng.random_range(0..config.entity_pool.len());
    let subject = config.entity_pool[subject_at].clone();

    // One draw hands out every attribute role, so all of them are distinct:
    // chain consequents, the hypothesis, base premises, distractor
    // consequents, and the attribute negatives swap in for the cause.
    let mut picks = index::sample(&mut rng, config.attribute_pool.len(), config.distinct_attributes_needed())
        .into_iter()
        .map(|i| config.attribute_pool[i].clone());
    let chain: Vec<Attribute> = picks.by_ref().take(level).collect();
    let hyp_attr = picks.next().expect("draw covers the hypothesis");
    let base: Vec<Attribute> = picks.by_ref().take(base_count).collect();
    let distractor_consequents: Vec<Attribute> = picks.by_ref().take(config.distractor_rules).collect();
    let off_attr = picks.next().expect("draw covers the replacement attribute");

    // Chain rules: r₁ consumes the hypothesis (plus one base premise when
    // the budget calls for it); later rules consume their predecessor's
    // consequent and absorb remaining base premises one each.
    let mut feeds = base.iter();
    let chain_rules: Vec<Rule> = chain
        .iter()
        .enumerate()
        .map(|(i, consequent)| {
            let mut antecedents = Vec::new();
            if i == 0 {
                if let Some(b) = feeds.next() {
                    antecedents.push(b.clone());
                }
                antecedents.push(hyp_attr.clone());
            } else {
                antecedents.push(chain[i - 1].clone());
                if let Some(b) = feeds.next() {
                    antecedents.push(b.clone());
                }
            }
            Rule::new(antecedents, consequent.clone()).expect("chain rules are 1-2 antecedents")
        })
        .collect();

    // Distractor rules may share antecedents with the chain, but their
    // consequents come from the reserved disjoint draw, so no sequence of
    // them can produce a chain attribute or the phenomenon. The replacement
    // attribute is kept out of every antecedent so negatives stay inert.
    let candidates: Vec<&Attribute> = config
        .attribute_pool
        .iter()
        .filter(|a| !distractor_consequents.contains(a) && **a != off_attr)
        .collect();
    let distractors: Vec<Rule> = distractor_consequents
        .iter()
        .map(|consequent| {
            let arity = rng.random_range(1..=2usize);
            let antecedents = index::sample(&mut rng, candidates.len(), arity)
                .into_iter()
                .map(|i| candidates[i].clone())
                .collect();
            Rule::new(antecedents, consequent.clone()).expect("distractor rules are 1-2 antecedents")
        })
        .collect();

    // Interference facts concern other entities only; rule locality (every
    // rule stays within one person) keeps them inert for the phenomenon.
    let others: Vec<&Entity> = config
        .entity_pool
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != subject_at)
        .map(|(_, e)| e)
        .collect();
    let attrs = &config.attribute_pool;
    let irrelevant: Vec<Fact> = if config.irrelevant_premises == 0 {
        Vec::new()
    } else {
        index::sample(&mut rng, others.len() * attrs.len(), config.irrelevant_premises)
            .into_iter()
            .map(|p| Fact::new(others[p / attrs.len()].clone(), attrs[p % attrs.len()].clone()))
            .collect()
    };

    let mut tagged_premises: Vec<(Fact, bool)> = base
        .iter()
        .map(|b| (Fact::new(subject.clone(), b.clone()), true))
        .chain(irrelevant.into_iter().map(|f| (f, false)))
        .collect();
    tagged_premises.shuffle(&mut rng);
    let premises: Vec<Fact> = tagged_premises.iter().map(|(f, _)| f.clone()).collect();
    let relevant_premises: BTreeSet<usize> = tagged_premises
        .iter()
        .enumerate()
        .filter(|(_, (_, relevant))| *relevant)
        .map(|(i, _)| i)
        .collect();

    let mut tagged_rules: Vec<(Rule, Option<usize>)> = chain_rules
        .into_iter()
        .enumerate()
        .map(|(i, r)| (r, Some(i)))
        .chain(distractors.into_iter().map(|r| (r, None)))
        .collect();
    tagged_rules.shuffle(&mut rng);
    let rules: Vec<Rule> = tagged_rules.iter().map(|(r, _)| r.clone()).collect();
    let mut chain_positions = vec![0usize; level];
    for (position, (_, tag)) in tagged_rules.iter().enumerate() {
        if let Some(i) = tag {
            chain_positions[*i] = position;
        }
    }

    let phenomenon = Fact::new(subject.clone(), chain.last().expect("level >= 1").clone());
    let possible_cause =
        Fact::new(subject, if positive { hyp_attr } else { off_attr }.clone());
    let meta = if positive {
        GroundTruth {
            level: config.level,
            chain: chain_positions.clone(),
            relevant_premises,
            hypothesis_relevant: true,
            relevant_rules: chain_positions.into_iter().collect(),
        }
    } else {
        // Nothing derives the phenomenon, so no premise or rule is part of
        // any proof.
        GroundTruth {
            level: config.level,
            chain: Vec::new(),
            relevant_premises: BTreeSet::new(),
            hypothesis_relevant: false,
            relevant_rules: BTreeSet::new(),
        }
    };

    Task {
        premises,
        rules,
        phenomenon,
        possible_cause,
        label: positive,
        meta: Some(meta),
        extra: Default::default(),
    }
}

/// Engine gate a candidate must pass before emission: the integrity checks
/// of [`validate_task`], hypothesis necessity for positives, and distractor
/// inertness (the relevant sub-problem alone reproduces the label).
fn verify(config: &GeneratorConfig, task: &Task) -> bool {
    debug_assert_eq!(task.premises.len(), config.irrelevant_premises + config.relevant_premises - 1);
    debug_assert_eq!(task.rules.len(), config.level as usize + config.distractor_rules);
    if !validate_task(task).is_ok() {
        return false;
    }
    let premises_only: FactSet = task.premises.iter().cloned().collect();
    if task.label && derives(&premises_only, &task.rules, &task.phenomenon) {
        return false;
    }
    let gt = task.meta.as_ref().expect("generated tasks carry ground truth");
    let kept: FactSet = gt
        .relevant_premises
        .iter()
        .map(|i| task.premises[*i].clone())
        .chain(std::iter::once(task.possible_cause.clone()))
        .collect();
    let kept_rules: Vec<Rule> =
        gt.relevant_rules.iter().map(|i| task.rules[*i].clone()).collect();
    derives(&kept, &kept_rules, &task.phenomenon) == task.label
}

/// Label totals of an emitted dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
    pub total: usize,
}

/// Sidecar record describing a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub config: GeneratorConfig,
    pub counts: LabelCounts,
    /// SHA-256 of the dataset file's bytes.
    pub sha256: String,
}

/// Where the manifest for a dataset file lives.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("manifest.json")
}

/// Streams `config.count` tasks to `path` as JSON lines and writes the
/// manifest beside it. Memory use is constant in `count`.
pub fn generate_dataset(config: &GeneratorConfig, path: &Path) -> Result<DatasetManifest, GeneratorError> {
    config.validate()?;
    let file =
        File::create(path).map_err(|source| GeneratorError::Io { record: 0, source })?;
    let mut writer = BufWriter::new(file);
    let mut hasher = Sha256::new();
    let mut positive = 0usize;
    for index in 0..config.count {
        let task = generate_task(config, index)?;
        if task.label {
            positive += 1;
        }
        let mut line = serialize_task(&task);
        line.push('\n');
        hasher.update(line.as_bytes());
        writer
            .write_all(line.as_bytes())
            .map_err(|source| GeneratorError::Io { record: index, source })?;
    }
    writer
        .flush()
        .map_err(|source| GeneratorError::Io { record: config.count, source })?;

    let manifest = DatasetManifest {
        schema_version: 1,
        config: config.clone(),
        counts: LabelCounts {
            positive,
            negative: config.count - positive,
            total: config.count,
        },
        sha256: hex::encode(hasher.finalize()),
    };
    let rendered = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(manifest_path(path), rendered)
        .map_err(|source| GeneratorError::Io { record: config.count, source })?;
    Ok(manifest)
}

/// Outcome of [`validate_task`]: empty means every check passed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    /// One entry per failed check, each starting with a stable name
    /// (`label_mismatch`, `duplicate_premise`, `slice_mismatch`, ...).
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Integrity checks for a task from any source: grammar round-trips,
/// duplicate premises/rules, tautological rules, subject agreement between
/// phenomenon and cause, label-vs-engine agreement, and — when ground truth
/// is present — proof depth, chain, and relevance-slice agreement.
pub fn validate_task(task: &Task) -> ValidationReport {
    let mut failures = Vec::new();

    for fact in task.premises.iter().chain([&task.phenomenon, &task.possible_cause]) {
        if parse_premise(&fact.to_string()).as_ref() != Ok(fact) {
            failures.push(format!("grammar: fact does not round-trip: {fact}"));
        }
    }
    for rule in &task.rules {
        if parse_rule(&rule.to_string()).as_ref() != Ok(rule) {
            failures.push(format!("grammar: rule does not round-trip: {rule}"));
        }
        if rule.is_tautology() {
            failures.push(format!("tautological_rule: {rule}"));
        }
    }
    for (i, fact) in task.premises.iter().enumerate() {
        if task.premises[..i].contains(fact) {
            failures.push(format!("duplicate_premise: index {i}: {fact}"));
        }
    }
    for (i, rule) in task.rules.iter().enumerate() {
        if task.rules[..i].contains(rule) {
            failures.push(format!("duplicate_rule: index {i}: {rule}"));
        }
    }
    if task.phenomenon.entity != task.possible_cause.entity {
        failures.push(format!(
            "entity_mismatch: phenomenon is about {} but the cause is about {}",
            task.phenomenon.entity, task.possible_cause.entity
        ));
    }

    let mut pstar: FactSet = task.premises.iter().cloned().collect();
    pstar.insert(task.possible_cause.clone());
    let derivable = derives(&pstar, &task.rules, &task.phenomenon);
    if derivable != task.label {
        failures.push(format!(
            "label_mismatch: engine derives {derivable}, label says {}",
            task.label
        ));
    }

    if let Some(gt) = &task.meta {
        if gt.level == 0 {
            failures.push("level_mismatch: ground truth level must be positive".to_string());
        }
        if task.label {
            if derivable {
                check_positive_ground_truth(task, gt, &pstar, &mut failures);
            }
        } else if !gt.chain.is_empty()
            || !gt.relevant_premises.is_empty()
            || !gt.relevant_rules.is_empty()
            || gt.hypothesis_relevant
        {
            failures.push(
                "negative_ground_truth_nonempty: negative tasks have no derivation".to_string(),
            );
        }
    }

    ValidationReport { failures }
}

/// Ground-truth agreement for a derivable positive task: exact proof depth,
/// a replayable chain, and a relevance slice matching the stored sets.
fn check_positive_ground_truth(
    task: &Task,
    gt: &GroundTruth,
    pstar: &FactSet,
    failures: &mut Vec<String>,
) {
    let proof = min_proof(pstar, &task.rules, &task.phenomenon)
        .expect("derivable phenomenon has a minimal proof");
    if proof.depth != gt.level {
        failures.push(format!(
            "level_mismatch: minimal proof depth {} but ground truth level {}",
            proof.depth, gt.level
        ));
    }

    // The chain must replay: applying its rules in order to the subject's
    // attributes reaches the phenomenon, and it must use exactly the rules
    // claimed relevant.
    let chain_ok = gt.chain.len() == gt.level as usize
        && gt.chain.iter().collect::<BTreeSet<_>>() == gt.relevant_rules.iter().collect()
        && replays(task, &gt.chain, pstar);
    if !chain_ok {
        failures.push(format!("chain_mismatch: chain {:?} does not replay", gt.chain));
    }

    match relevance_slice(pstar, &task.rules, &task.phenomenon) {
        Ok(slice) => {
            let expected_premises: BTreeSet<usize> = task
                .premises
                .iter()
                .enumerate()
                .filter(|(_, fact)| slice.facts.contains(fact))
                .map(|(i, _)| i)
                .collect();
            let hypothesis_used = slice.facts.contains(&task.possible_cause);
            if expected_premises != gt.relevant_premises
                || hypothesis_used != gt.hypothesis_relevant
                || slice.rule_indices != gt.relevant_rules
            {
                failures.push(format!(
                    "slice_mismatch: engine keeps premises {expected_premises:?} (hypothesis {hypothesis_used}), rules {:?}",
                    slice.rule_indices
                ));
            }
        }
        Err(_) => failures.push("slice_mismatch: no relevance slice exists".to_string()),
    }
}

/// Whether applying `chain` in order, restricted to the phenomenon's
/// subject, ends by producing the phenomenon itself.
fn replays(task: &Task, chain: &[usize], pstar: &FactSet) -> bool {
    let subject = &task.phenomenon.entity;
    let mut have: BTreeSet<&Attribute> = pstar
        .iter()
        .filter(|f| f.entity == *subject)
        .map(|f| &f.attribute)
        .collect();
    let mut last = None;
    for &at in chain {
        let Some(rule) = task.rules.get(at) else { return false };
        if !rule.antecedents().iter().all(|a| have.contains(a)) {
            return false;
        }
        have.insert(rule.consequent());
        last = Some(rule.consequent());
    }
    last == Some(&task.phenomenon.attribute)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::lang::parse_task;

    fn small(level: u32, count: usize) -> GeneratorConfig {
        GeneratorConfig::for_level(level, count, 7)
    }

    #[test]
    fn same_seed_and_index_is_byte_identical() {
        let config = small(2, 10);
        for index in [0, 3, 9] {
            let a = serialize_task(&generate_task(&config, index).unwrap());
            let b = serialize_task(&generate_task(&config, index).unwrap());
            assert_eq!(a, b);
        }
        let other = GeneratorConfig { seed: 8, ..small(2, 10) };
        assert_ne!(
            serialize_task(&generate_task(&config, 0).unwrap()),
            serialize_task(&generate_task(&other, 0).unwrap())
        );
    }

    #[test]
    fn level_one_tasks_have_the_sample_shape() {
        let config = small(1, 8);
        let task = (0..8)
            .map(|i| generate_task(&config, i).unwrap())
            .find(|t| t.label)
            .expect("half the labels are positive");
        assert_eq!(task.premises.len(), 13, "12 irrelevant + 1 base premise");
        assert_eq!(task.rules.len(), 5, "1 chain rule + 4 distractors");
        let gt = task.meta.as_ref().unwrap();
        assert_eq!(gt.level, 1);
        assert_eq!(gt.chain.len(), 1);
        assert_eq!(gt.relevant_premises.len(), 1);
        assert!(gt.hypothesis_relevant);
        // The chain rule consumes the base premise and the hypothesis.
        let rule = &task.rules[gt.chain[0]];
        assert_eq!(rule.antecedents().len(), 2);
        assert!(rule.antecedents().contains(&task.possible_cause.attribute));
        assert_eq!(*rule.consequent(), task.phenomenon.attribute);
    }

    #[test]
    fn every_level_meets_its_premise_budget() {
        for (level, premises, rules, relevant) in
            [(1, 13, 5, 1), (2, 13, 6, 1), (3, 18, 7, 2), (4, 18, 8, 2)]
        {
            let config = small(level, 4);
            for index in 0..4 {
                let task = generate_task(&config, index).unwrap();
                assert_eq!(task.premises.len(), premises, "level {level}");
                assert_eq!(task.rules.len(), rules, "level {level}");
                if task.label {
                    let gt = task.meta.as_ref().unwrap();
                    assert_eq!(gt.relevant_premises.len(), relevant, "level {level}");
                    assert_eq!(gt.chain.len(), level as usize);
                }
            }
        }
    }

    #[test]
    fn labels_are_engine_sound_and_positives_need_the_hypothesis() {
        for level in 1..=4 {
            let config = small(level, 12);
            for index in 0..12 {
                let task = generate_task(&config, index).unwrap();
                let mut pstar: FactSet = task.premises.iter().cloned().collect();
                pstar.insert(task.possible_cause.clone());
                assert_eq!(derives(&pstar, &task.rules, &task.phenomenon), task.label);
                if task.label {
                    let alone: FactSet = task.premises.iter().cloned().collect();
                    assert!(!derives(&alone, &task.rules, &task.phenomenon));
                    assert_eq!(
                        min_proof(&pstar, &task.rules, &task.phenomenon).unwrap().depth,
                        level
                    );
                } else {
                    assert!(task.meta.as_ref().unwrap().chain.is_empty());
                }
            }
        }
    }

    #[test]
    fn interference_is_inert() {
        let config = small(3, 6);
        for index in 0..6 {
            let task = generate_task(&config, index).unwrap();
            let gt = task.meta.as_ref().unwrap();
            let kept: FactSet = gt
                .relevant_premises
                .iter()
                .map(|i| task.premises[*i].clone())
                .chain(std::iter::once(task.possible_cause.clone()))
                .collect();
            let kept_rules: Vec<Rule> =
                gt.relevant_rules.iter().map(|i| task.rules[*i].clone()).collect();
            assert_eq!(derives(&kept, &kept_rules, &task.phenomenon), task.label);
        }
    }

    #[test]
    fn positive_quota_is_exact_not_sampled() {
        for (count, fraction, expected) in [(10, 0.5, 5), (10, 1.0, 10), (10, 0.0, 0), (7, 0.5, 4)]
        {
            let config = GeneratorConfig { positive_fraction: fraction, ..small(1, count) };
            let positives = (0..count)
                .filter(|i| generate_task(&config, *i).unwrap().label)
                .count();
            assert_eq!(positives, expected, "count {count} fraction {fraction}");
        }
    }

    #[test]
    fn generated_tasks_validate_cleanly() {
        for level in 1..=4 {
            let config = small(level, 6);
            for index in 0..6 {
                let task = generate_task(&config, index).unwrap();
                let report = validate_task(&task);
                assert!(report.is_ok(), "level {level} index {index}: {:?}", report.failures);
            }
        }
    }

    #[test]
    fn flipping_the_label_is_caught() {
        let config = small(1, 4);
        let mut task = generate_task(&config, 0).unwrap();
        task.label = !task.label;
        let report = validate_task(&task);
        assert!(report.failures.iter().any(|f| f.starts_with("label_mismatch")), "{report:?}");
    }

    #[test]
    fn corrupted_ground_truth_is_caught() {
        let config = small(2, 8);
        let mut task = (0..8)
            .map(|i| generate_task(&config, i).unwrap())
            .find(|t| t.label)
            .unwrap();
        let gt = task.meta.as_mut().unwrap();
        gt.level += 1;
        gt.chain.reverse();
        let report = validate_task(&task);
        assert!(report.failures.iter().any(|f| f.starts_with("level_mismatch")), "{report:?}");
        // A 2-rule chain applied in reverse order cannot replay.
        assert!(report.failures.iter().any(|f| f.starts_with("chain_mismatch")), "{report:?}");
    }

    #[test]
    fn duplicate_and_mismatch_checks_fire() {
        let config = small(1, 4);
        let mut task = generate_task(&config, 0).unwrap();
        task.premises.push(task.premises[0].clone());
        task.rules.push(task.rules[0].clone());
        task.meta = None;
        task.label = {
            let mut pstar: FactSet = task.premises.iter().cloned().collect();
            pstar.insert(task.possible_cause.clone());
            derives(&pstar, &task.rules, &task.phenomenon)
        };
        let report = validate_task(&task);
        assert!(report.failures.iter().any(|f| f.starts_with("duplicate_premise")));
        assert!(report.failures.iter().any(|f| f.starts_with("duplicate_rule")));
    }

    #[test]
    fn pool_exhaustion_and_bad_configs_are_rejected() {
        let mut config = small(4, 1);
        config.attribute_pool.truncate(9); // needs 4+1+2+4+1 = 12
        assert!(matches!(
            config.validate(),
            Err(GeneratorError::VocabularyExhausted { pool: "attribute", needed: 12, available: 9 })
        ));

        let mut config = small(1, 1);
        config.entity_pool.truncate(1);
        assert!(matches!(config.validate(), Err(GeneratorError::VocabularyExhausted { .. })));

        for broken in [
            GeneratorConfig { level: 0, ..small(1, 1) },
            GeneratorConfig { level: 5, ..small(1, 1) },
            GeneratorConfig { positive_fraction: 1.5, ..small(1, 1) },
            GeneratorConfig { relevant_premises: 0, ..small(1, 1) },
            GeneratorConfig { relevant_premises: 3, ..small(1, 1) },
        ] {
            assert!(matches!(broken.validate(), Err(GeneratorError::InvalidConfig(_))));
        }

        let config = small(1, 4);
        assert!(matches!(
            generate_task(&config, 4),
            Err(GeneratorError::InvalidConfig(_))
        ));
    }

    #[test]
    fn dataset_files_stream_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lv1.jsonl");
        let config = small(1, 20);
        let manifest = generate_dataset(&config, &path).unwrap();
        assert_eq!(manifest.counts, LabelCounts { positive: 10, negative: 10, total: 20 });
        assert_eq!(manifest.config, config);

        let content = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = content.lines().collect();
        assert_eq!(lines.len(), 20);
        for line in &lines {
            let task = parse_task(line).unwrap();
            assert!(validate_task(&task).is_ok());
        }
        assert_eq!(manifest.sha256, hex::encode(Sha256::digest(content.as_bytes())));

        let sidecar = std::fs::read_to_string(manifest_path(&path)).unwrap();
        let read_back: DatasetManifest = serde_json::from_str(&sidecar).unwrap();
        assert_eq!(read_back, manifest);
    }

    #[test]
    fn empty_dataset_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let manifest = generate_dataset(&small(1, 0), &path).unwrap();
        assert_eq!(manifest.counts.total, 0);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
    }

    proptest! {
        /// Any in-range (level, seed, index) yields a task that passes the
        /// full integrity battery and re-parses from its serialized form.
        #[test]
        fn generated_tasks_are_always_verifiable(
            level in 1u32..=4,
            seed in any::<u64>(),
            index in 0usize..8,
        ) {
            let config = GeneratorConfig::for_level(level, 8, seed);
            let task = generate_task(&config, index).unwrap();
            prop_assert!(validate_task(&task).is_ok());
            let reparsed = parse_task(&serialize_task(&task)).unwrap();
            prop_assert_eq!(reparsed, task);
        }
    }
}
