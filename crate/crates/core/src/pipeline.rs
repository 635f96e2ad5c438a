//! The CauseJudger pipeline and the baselines it is measured against.
//!
//! CauseJudger (CJ) turns the reverse question "does this cause explain the
//! phenomenon?" into a forward one, in three moves:
//!
//! 1. **LRM** — hypothesis injection: add the possible cause to the premises
//!    (`P* = P ∪ {hyp}`). Pure bookkeeping; no backend call.
//! 2. **IPM** — relevance pruning: one batched backend call judges which
//!    premises and rules matter for the phenomenon; everything else is
//!    dropped. Falls back to keeping everything when the reply is unusable.
//! 3. **FRM** — forward reasoning: one backend call decides whether the
//!    phenomenon follows from the pruned problem.
//!
//! The baselines cover the ablation space: IO and Zero-Shot-CoT ask the
//! reverse question directly, SC-CoT votes over k CoT samples, LRM+FRM skips
//! pruning, and IPM-Only prunes but then asks the reverse question. Every
//! method produces a [`PipelineTrace`] with exact per-call accounting:
//! CJ = 2, IO = 1, ZeroShotCoT = 1, SC-CoT = k, LRM+FRM = 1, IPM-Only = 2
//! calls (in the default batched-IPM mode).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::backend::{
    answer_direct, judge_relevance, judge_relevance_item, reason_forward, Backend, BackendCall,
    DirectStyle, PromptTemplates, RelevanceItem,
};
use crate::engine::FactSet;
use crate::lang::{serialize_task, Fact, Rule, Task};

/// A judging method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// LRM → IPM → FRM.
    Cj,
    /// Direct reverse question, plain.
    Io,
    /// Direct reverse question with the step-by-step trigger.
    ZeroShotCot,
    /// `samples` Zero-Shot-CoT calls, majority vote.
    ScCot { samples: usize },
    /// Hypothesis injection + forward reasoning, no pruning.
    LrmFrm,
    /// Hypothesis injection + pruning, then the reverse question (IO style)
    /// over the pruned task.
    IpmOnly,
}

impl Method {
    pub const DEFAULT_SC_COT_SAMPLES: usize = 5;

    /// Backend calls one task costs under this method (batched-IPM mode).
    pub fn expected_calls(&self) -> usize {
        match self {
            Method::Cj => 2,
            Method::Io => 1,
            Method::ZeroShotCot => 1,
            Method::ScCot { samples } => *samples,
            Method::LrmFrm => 1,
            Method::IpmOnly => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Cj => f.write_str("cj"),
            Method::Io => f.write_str("io"),
            Method::ZeroShotCot => f.write_str("zero-shot-cot"),
            Method::ScCot { samples } => write!(f, "sc-cot:{samples}"),
            Method::LrmFrm => f.write_str("lrm-frm"),
            Method::IpmOnly => f.write_str("ipm-only"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cj" => Ok(Method::Cj),
            "io" => Ok(Method::Io),
            "zero-shot-cot" => Ok(Method::ZeroShotCot),
            "lrm-frm" => Ok(Method::LrmFrm),
            "ipm-only" => Ok(Method::IpmOnly),
            "sc-cot" => Ok(Method::ScCot { samples: Method::DEFAULT_SC_COT_SAMPLES }),
            other => match other.strip_prefix("sc-cot:") {
                Some(k) => {
                    let samples: usize =
                        k.parse().map_err(|_| format!("bad sc-cot sample count {k:?}"))?;
                    if samples == 0 {
                        return Err("sc-cot needs at least one sample".to_string());
                    }
                    Ok(Method::ScCot { samples })
                }
                None => Err(format!(
                    "unknown method {other:?} (expected cj, io, zero-shot-cot, sc-cot[:k], lrm-frm, ipm-only)"
                )),
            },
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// How IPM consults the backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpmMode {
    /// One call listing every item (the reading consistent with CJ's
    /// two-call budget).
    #[default]
    Batched,
    /// One call per item — the literal per-item judgment loop, for fidelity
    /// experiments. Call counts grow to |items| + 1 for CJ.
    PerItem,
}

/// What a method run concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    True,
    False,
    /// No usable answer (backend failure or unparseable reply end to end).
    /// Always scored as incorrect.
    Abstained,
}

impl Verdict {
    fn from_option(v: Option<bool>) -> Self {
        match v {
            Some(true) => Verdict::True,
            Some(false) => Verdict::False,
            None => Verdict::Abstained,
        }
    }

    fn matches(&self, label: bool) -> bool {
        matches!((self, label), (Verdict::True, true) | (Verdict::False, false))
    }
}

/// Complete record of one (task, method) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    /// Position of the task in its dataset.
    pub task_index: usize,
    /// First 12 hex digits of the SHA-256 of the serialized task; guards
    /// resumed runs against a swapped dataset.
    pub task_key: String,
    pub method: Method,
    /// 1-based run counter for this (task, method) cell; later attempts
    /// supersede earlier ones during aggregation.
    pub attempt: u32,
    /// Every backend call, in execution order.
    pub calls: Vec<BackendCall>,
    /// Task-premise indices IPM kept (methods that prune only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kept_premises: Option<Vec<usize>>,
    /// Whether the injected hypothesis survived pruning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kept_hypothesis: Option<bool>,
    /// Rule indices IPM kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kept_rules: Option<Vec<usize>>,
    /// Facts dropped by IPM (hypothesis included).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruned_premise_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruned_rule_count: Option<usize>,
    pub verdict: Verdict,
    pub correct: bool,
    /// Noteworthy degradations ("ipm_fallback_keep_all", "sc_cot_tie",
    /// "abstained", ...), in occurrence order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<String>,
}

/// Stable short identity of a task document.
pub fn task_key(task: &Task) -> String {
    let digest = Sha256::digest(serialize_task(task).as_bytes());
    hex::encode(&digest[..6])
}

/// Hypothesis injection: `P* = P ∪ {possible_cause}`. Pure — makes no
/// backend call, and is a no-op when the cause is already a premise.
pub fn lrm(task: &Task) -> FactSet {
    let mut pstar: FactSet = task.premises.iter().cloned().collect();
    pstar.insert(task.possible_cause.clone());
    pstar
}

/// Everything relevance pruning produced, plus its call records.
#[derive(Debug, Clone)]
pub struct IpmOutcome {
    /// Kept facts, in `pstar` order.
    pub premises: FactSet,
    /// Kept rules, in input order.
    pub rules: Vec<Rule>,
    /// Indices (into the `pstar` iteration order) of kept facts.
    pub kept_fact_indices: Vec<usize>,
    /// Indices (into the input rule list) of kept rules.
    pub kept_rule_indices: Vec<usize>,
    pub pruned_premise_count: usize,
    pub pruned_rule_count: usize,
    pub calls: Vec<BackendCall>,
    pub events: Vec<String>,
}

/// Irrelevant-premise pruning: asks the backend which facts and rules matter
/// for `phenomenon` and keeps exactly those, preserving input order.
///
/// Batched mode issues one call over the numbered concatenation of facts
/// then rules. An unusable reply keeps everything (pruning must never lose
/// information silently) and records `ipm_fallback_keep_all`. Per-item mode
/// asks once per item; there an unusable reply conservatively keeps that
/// item.
pub fn ipm(
    backend: &dyn Backend,
    templates: &PromptTemplates,
    pstar: &FactSet,
    rules: &[Rule],
    phenomenon: &Fact,
    mode: IpmMode,
) -> IpmOutcome {
    let items: Vec<RelevanceItem> = pstar
        .iter()
        .cloned()
        .map(RelevanceItem::Premise)
        .chain(rules.iter().cloned().map(RelevanceItem::Rule))
        .collect();
    let fact_count = pstar.len();

    let mut calls = Vec::new();
    let mut events = Vec::new();
    let kept: Vec<bool> = match mode {
        IpmMode::Batched => {
            let (kept_set, call) = judge_relevance(backend, templates, &items, phenomenon);
            calls.push(call);
            match kept_set {
                Some(set) => (0..items.len()).map(|i| set.contains(&i)).collect(),
                None => {
                    events.push("ipm_fallback_keep_all".to_string());
                    vec![true; items.len()]
                }
            }
        }
        IpmMode::PerItem => (0..items.len())
            .map(|i| {
                let (keep, call) = judge_relevance_item(backend, templates, &items, i, phenomenon);
                calls.push(call);
                keep.unwrap_or_else(|| {
                    events.push(format!("ipm_item_fallback_keep:{i}"));
                    true
                })
            })
            .collect(),
    };

    let mut premises = FactSet::new();
    let mut kept_fact_indices = Vec::new();
    for (i, fact) in pstar.iter().enumerate() {
        if kept[i] {
            premises.insert(fact.clone());
            kept_fact_indices.push(i);
        }
    }
    let mut kept_rules = Vec::new();
    let mut kept_rule_indices = Vec::new();
    for (j, rule) in rules.iter().enumerate() {
        if kept[fact_count + j] {
            kept_rules.push(rule.clone());
            kept_rule_indices.push(j);
        }
    }
    IpmOutcome {
        pruned_premise_count: fact_count - premises.len(),
        pruned_rule_count: rules.len() - kept_rules.len(),
        premises,
        rules: kept_rules,
        kept_fact_indices,
        kept_rule_indices,
        calls,
        events,
    }
}

/// Where the injected hypothesis sits in the `lrm` fact order: either it
/// already was a premise (its index) or it was appended after all premises.
fn hypothesis_position(task: &Task) -> usize {
    task.premises
        .iter()
        .position(|p| *p == task.possible_cause)
        .unwrap_or(task.premises.len())
}

/// Runs one method on one task and records everything.
pub fn run_method(
    backend: &dyn Backend,
    templates: &PromptTemplates,
    method: Method,
    task: &Task,
    task_index: usize,
    ipm_mode: IpmMode,
) -> PipelineTrace {
    let mut trace = PipelineTrace {
        task_index,
        task_key: task_key(task),
        method,
        attempt: 1,
        calls: Vec::new(),
        kept_premises: None,
        kept_hypothesis: None,
        kept_rules: None,
        pruned_premise_count: None,
        pruned_rule_count: None,
        verdict: Verdict::Abstained,
        correct: false,
        events: Vec::new(),
    };

    let verdict = match method {
        Method::Cj => {
            let pstar = lrm(task);
            let outcome =
                ipm(backend, templates, &pstar, &task.rules, &task.phenomenon, ipm_mode);
            let (verdict, call) = reason_forward(
                backend,
                templates,
                &outcome.premises,
                &outcome.rules,
                &task.phenomenon,
            );
            absorb_ipm(&mut trace, task, outcome);
            trace.calls.push(call);
            verdict
        }
        Method::LrmFrm => {
            let pstar = lrm(task);
            let (verdict, call) =
                reason_forward(backend, templates, &pstar, &task.rules, &task.phenomenon);
            trace.calls.push(call);
            verdict
        }
        Method::IpmOnly => {
            let pstar = lrm(task);
            let outcome =
                ipm(backend, templates, &pstar, &task.rules, &task.phenomenon, ipm_mode);
            // The reverse question re-injects the cause itself, so the pruned
            // task lists only genuine premises that survived.
            let pruned = Task {
                premises: outcome
                    .premises
                    .iter()
                    .filter(|f| **f != task.possible_cause)
                    .cloned()
                    .collect(),
                rules: outcome.rules.clone(),
                phenomenon: task.phenomenon.clone(),
                possible_cause: task.possible_cause.clone(),
                label: task.label,
                meta: None,
                extra: Default::default(),
            };
            absorb_ipm(&mut trace, task, outcome);
            let (verdict, call) = answer_direct(backend, templates, &pruned, DirectStyle::Io);
            trace.calls.push(call);
            verdict
        }
        Method::Io => {
            let (verdict, call) = answer_direct(backend, templates, task, DirectStyle::Io);
            trace.calls.push(call);
            verdict
        }
        Method::ZeroShotCot => {
            let (verdict, call) = answer_direct(backend, templates, task, DirectStyle::ZeroShotCot);
            trace.calls.push(call);
            verdict
        }
        Method::ScCot { samples } => {
            let mut yes = 0usize;
            let mut no = 0usize;
            for _ in 0..samples {
                let (verdict, call) =
                    answer_direct(backend, templates, task, DirectStyle::ZeroShotCot);
                trace.calls.push(call);
                match verdict {
                    Some(true) => yes += 1,
                    Some(false) => no += 1,
                    None => {}
                }
            }
            if yes + no == 0 {
                None
            } else if yes == no {
                trace.events.push("sc_cot_tie".to_string());
                Some(false)
            } else {
                Some(yes > no)
            }
        }
    };

    trace.verdict = Verdict::from_option(verdict);
    if trace.verdict == Verdict::Abstained {
        trace.events.push("abstained".to_string());
    }
    trace.correct = trace.verdict.matches(task.label);
    trace
}

/// Copies an IPM outcome into the trace, translating fact positions in the
/// `lrm` order into task-premise indices plus the hypothesis flag.
fn absorb_ipm(trace: &mut PipelineTrace, task: &Task, outcome: IpmOutcome) {
    let hyp_at = hypothesis_position(task);
    let mut kept_premises: Vec<usize> =
        outcome.kept_fact_indices.iter().copied().filter(|i| *i != hyp_at).collect();
    kept_premises.retain(|i| *i < task.premises.len());
    let kept_hypothesis = outcome.kept_fact_indices.contains(&hyp_at);
    if hyp_at < task.premises.len() && kept_hypothesis {
        // The cause doubles as a premise; it counts under both views.
        kept_premises.push(hyp_at);
        kept_premises.sort_unstable();
    }
    trace.kept_premises = Some(kept_premises);
    trace.kept_hypothesis = Some(kept_hypothesis);
    trace.kept_rules = Some(outcome.kept_rule_indices);
    trace.pruned_premise_count = Some(outcome.pruned_premise_count);
    trace.pruned_rule_count = Some(outcome.pruned_rule_count);
    trace.calls.extend(outcome.calls);
    trace.events.extend(outcome.events);
}
