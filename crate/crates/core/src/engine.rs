//! Deterministic forward chaining: closure, derivability, minimal proofs,
//! and relevance slices.
//!
//! Rules quantify over one implicit person, so derivation never crosses
//! entities and every query decomposes into independent per-entity attribute
//! problems. That keeps the engine exact and cheap enough to label datasets
//! by brute force: closure is a fixpoint over at most |attributes| rounds,
//! and minimal proofs come from a small dynamic program.
//!
//! Everything here is a pure function over immutable inputs; concurrent use
//! needs no coordination.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::lang::{Attribute, Entity, Fact, Rule};

/// A duplicate-free collection of facts with entity and attribute indexes.
///
/// Insertion order is remembered — [`FactSet::iter`] replays it — because
/// prompt rendering and pruning want stable, input-faithful ordering. Order
/// never affects queries or equality: two sets holding the same facts compare
/// equal regardless of how they were built.
#[derive(Debug, Clone, Default)]
pub struct FactSet {
    facts: Vec<Fact>,
    by_entity: HashMap<Entity, BTreeSet<Attribute>>,
    by_attribute: HashMap<Attribute, BTreeSet<Entity>>,
}

impl FactSet {
    pub fn new() -> Self {
        FactSet::default()
    }

    /// Adds a fact; returns false (and changes nothing) if already present.
    pub fn insert(&mut self, fact: Fact) -> bool {
        if self.contains(&fact) {
            return false;
        }
        self.by_entity.entry(fact.entity.clone()).or_default().insert(fact.attribute.clone());
        self.by_attribute.entry(fact.attribute.clone()).or_default().insert(fact.entity.clone());
        self.facts.push(fact);
        true
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.by_entity.get(&fact.entity).is_some_and(|attrs| attrs.contains(&fact.attribute))
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Facts in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.facts.iter()
    }

    /// Attributes currently known for an entity, if any.
    pub fn attributes_of(&self, entity: &Entity) -> Option<&BTreeSet<Attribute>> {
        self.by_entity.get(entity)
    }

    /// Entities currently carrying an attribute, if any.
    pub fn entities_with(&self, attribute: &Attribute) -> Option<&BTreeSet<Entity>> {
        self.by_attribute.get(attribute)
    }

    /// Entities in order of first appearance.
    pub fn entities(&self) -> Vec<Entity> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for fact in &self.facts {
            if seen.insert(fact.entity.clone()) {
                out.push(fact.entity.clone());
            }
        }
        out
    }
}

impl PartialEq for FactSet {
    fn eq(&self, other: &Self) -> bool {
        self.by_entity == other.by_entity
    }
}
impl Eq for FactSet {}

impl FromIterator<Fact> for FactSet {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        let mut set = FactSet::new();
        for fact in iter {
            set.insert(fact);
        }
        set
    }
}

impl Extend<Fact> for FactSet {
    fn extend<I: IntoIterator<Item = Fact>>(&mut self, iter: I) {
        for fact in iter {
            self.insert(fact);
        }
    }
}

/// How one fact was established in a proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofNode {
    /// The fact was given.
    Base,
    /// The fact is the consequent of `rule` (at position `rule_index` in the
    /// rule list); `children` prove its antecedents, in the rule's order.
    Derived { rule_index: usize, rule: Rule, children: Vec<ProofTree> },
}

/// A derivation of one fact, down to base facts.
///
/// `depth` counts the maximum number of rule applications on any root-to-leaf
/// path — the formal notion of reasoning chain length. Base facts have depth
/// zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofTree {
    pub root: Fact,
    pub node: ProofNode,
    pub depth: u32,
}

impl ProofTree {
    /// Base facts the proof consumes.
    pub fn support_premises(&self) -> BTreeSet<Fact> {
        let mut out = BTreeSet::new();
        self.collect_premises(&mut out);
        out
    }

    fn collect_premises(&self, out: &mut BTreeSet<Fact>) {
        match &self.node {
            ProofNode::Base => {
                out.insert(self.root.clone());
            }
            ProofNode::Derived { children, .. } => {
                for child in children {
                    child.collect_premises(out);
                }
            }
        }
    }

    /// Rules the proof applies.
    pub fn support_rules(&self) -> BTreeSet<Rule> {
        let mut out = BTreeSet::new();
        self.walk_rules(&mut |_, rule| {
            out.insert(rule.clone());
        });
        out
    }

    /// Positions (in the original rule list) of the rules the proof applies.
    pub fn support_rule_indices(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.walk_rules(&mut |index, _| {
            out.insert(index);
        });
        out
    }

    fn walk_rules(&self, f: &mut impl FnMut(usize, &Rule)) {
        if let ProofNode::Derived { rule_index, rule, children } = &self.node {
            f(*rule_index, rule);
            for child in children {
                child.walk_rules(f);
            }
        }
    }

    /// Total rule applications in the tree (repeated sub-derivations counted
    /// each time they occur).
    pub fn total_applications(&self) -> u64 {
        match &self.node {
            ProofNode::Base => 0,
            ProofNode::Derived { children, .. } => {
                1 + children.iter().map(ProofTree::total_applications).sum::<u64>()
            }
        }
    }
}

/// The part of a problem a goal actually depends on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    /// Supporting base facts, in the base set's order.
    pub facts: FactSet,
    /// Supporting rules, in ascending original position.
    pub rules: Vec<Rule>,
    /// Original positions of `rules`.
    pub rule_indices: BTreeSet<usize>,
}

/// Asked for the slice of a goal that does not follow from the inputs.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("goal \"{goal}\" is not derivable from the given facts and rules")]
pub struct NotDerivable {
    pub goal: Fact,
}

/// Attribute-level fixpoint for one entity: all attributes derivable from
/// `start` under `rules`, with newly derived ones also returned in a
/// deterministic firing order (rule-list order within each round).
fn saturate(start: &BTreeSet<Attribute>, rules: &[Rule]) -> (BTreeSet<Attribute>, Vec<Attribute>) {
    let mut have = start.clone();
    let mut added = Vec::new();
    loop {
        let mut changed = false;
        for rule in rules {
            if !have.contains(rule.consequent())
                && rule.antecedents().iter().all(|a| have.contains(a))
            {
                have.insert(rule.consequent().clone());
                added.push(rule.consequent().clone());
                changed = true;
            }
        }
        if !changed {
            return (have, added);
        }
    }
}

/// Least fixpoint of `base` under `rules`, applied per entity.
pub fn closure(base: &FactSet, rules: &[Rule]) -> FactSet {
    let mut result = base.clone();
    for entity in base.entities() {
        let attrs = base.attributes_of(&entity).expect("entity came from the set");
        let (_, added) = saturate(attrs, rules);
        for attribute in added {
            result.insert(Fact::new(entity.clone(), attribute));
        }
    }
    result
}

/// True iff `goal` is in the closure of `base` under `rules`.
pub fn derives(base: &FactSet, rules: &[Rule], goal: &Fact) -> bool {
    if base.contains(goal) {
        return true;
    }
    match base.attributes_of(&goal.entity) {
        Some(attrs) => saturate(attrs, rules).0.contains(&goal.attribute),
        None => false,
    }
}

/// Proof cost: primary key is depth (chain length), secondary is total rule
/// applications. Comparison is lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Cost {
    depth: u32,
    applications: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Choice {
    Base,
    Rule(usize),
}

/// For every derivable attribute of one entity, the chosen way to establish
/// it. The map is a fixpoint of the cost recurrence
/// `cost(a) = (0, 0)` for base attributes, else
/// `min over rules r ⊢ a of (1 + max depth(antecedents), 1 + Σ applications)`,
/// with ties broken by lowest rule index.
///
/// One choice per attribute (rather than per tree position) keeps the proof
/// space route-closed: every attribute in a proof has exactly one production,
/// which is what makes the extracted slice inclusion-minimal.
fn choice_map(base_attrs: &BTreeSet<Attribute>, rules: &[Rule]) -> BTreeMap<Attribute, (Cost, Choice)> {
    let mut best: BTreeMap<Attribute, (Cost, Choice)> = base_attrs
        .iter()
        .map(|a| (a.clone(), (Cost { depth: 0, applications: 0 }, Choice::Base)))
        .collect();
    loop {
        let mut changed = false;
        for (index, rule) in rules.iter().enumerate() {
            let mut depth = 0u32;
            let mut applications = 1u64;
            let mut viable = true;
            for antecedent in rule.antecedents() {
                match best.get(antecedent) {
                    Some((cost, _)) => {
                        depth = depth.max(cost.depth);
                        applications = applications.saturating_add(cost.applications);
                    }
                    None => {
                        viable = false;
                        break;
                    }
                }
            }
            if !viable {
                continue;
            }
            let candidate = Cost { depth: depth + 1, applications };
            let better = match best.get(rule.consequent()) {
                None => true,
                Some((_, Choice::Base)) => false, // depth 0 is unbeatable
                Some((cost, Choice::Rule(prev))) => (candidate, index) < (*cost, *prev),
            };
            if better {
                best.insert(rule.consequent().clone(), (candidate, Choice::Rule(index)));
                changed = true;
            }
        }
        if !changed {
            // At the fixpoint each stored cost is exact with respect to the
            // final antecedent costs, so choice edges strictly decrease depth
            // and tree construction below terminates.
            return best;
        }
    }
}

fn build_tree(
    entity: &Entity,
    attribute: &Attribute,
    best: &BTreeMap<Attribute, (Cost, Choice)>,
    rules: &[Rule],
) -> ProofTree {
    let (cost, choice) = &best[attribute];
    let root = Fact::new(entity.clone(), attribute.clone());
    match choice {
        Choice::Base => ProofTree { root, node: ProofNode::Base, depth: 0 },
        Choice::Rule(index) => {
            let rule = &rules[*index];
            let children: Vec<ProofTree> = rule
                .antecedents()
                .iter()
                .map(|a| build_tree(entity, a, best, rules))
                .collect();
            let depth = 1 + children.iter().map(|c| c.depth).max().unwrap_or(0);
            debug_assert_eq!(depth, cost.depth);
            ProofTree { root, node: ProofNode::Derived { rule_index: *index, rule: rule.clone(), children }, depth }
        }
    }
}

/// A minimal proof of `goal`, or None when it does not follow.
///
/// Minimality is by depth first (the reasoning chain length), then by total
/// rule applications, then by lowest rule index — so the result is unique and
/// identical across runs. The secondary costs are minimized compositionally
/// over per-attribute choices, which also makes the proof's support sets
/// inclusion-minimal (see [`relevance_slice`]).
pub fn min_proof(base: &FactSet, rules: &[Rule], goal: &Fact) -> Option<ProofTree> {
    let empty = BTreeSet::new();
    let attrs = base.attributes_of(&goal.entity).unwrap_or(&empty);
    let best = choice_map(attrs, rules);
    if !best.contains_key(&goal.attribute) {
        return None;
    }
    Some(build_tree(&goal.entity, &goal.attribute, &best, rules))
}

/// The support sets of the minimal proof: exactly the base facts and rules
/// the goal depends on.
///
/// Guarantees: `derives(slice.facts, slice.rules, goal)` holds, and the slice
/// is inclusion-minimal — removing any single fact or rule from it breaks
/// derivability from the slice alone. Minimality follows from the one-
/// production-per-attribute construction of the proof: every slice element
/// sits on the unique route to some attribute the goal transitively needs.
pub fn relevance_slice(base: &FactSet, rules: &[Rule], goal: &Fact) -> Result<Slice, NotDerivable> {
    let tree = min_proof(base, rules, goal).ok_or_else(|| NotDerivable { goal: goal.clone() })?;
    let premises = tree.support_premises();
    let rule_indices = tree.support_rule_indices();
    let facts: FactSet = base.iter().filter(|f| premises.contains(f)).cloned().collect();
    let rules: Vec<Rule> = rule_indices.iter().map(|&i| rules[i].clone()).collect();
    Ok(Slice { facts, rules, rule_indices })
}
