//! Experiment runner: (dataset × methods × backend) with resumable traces
//! and reproducible reports.
//!
//! [`run_experiment`] executes every (task, method) cell of the selected
//! subset, streaming one [`PipelineTrace`] per completed cell to
//! `traces.jsonl` in the output directory. The trace file is append-only
//! and keyed by (task index, method, attempt): re-running the same spec
//! skips cells that already have a trace, so an interrupted run picks up
//! where it stopped. A trace whose task key no longer matches the dataset
//! aborts the run rather than silently mixing two datasets.
//!
//! Aggregation is a pure fold over the traces: the same traces always
//! reproduce the same `report.json` byte for byte. The report carries
//! success rate (percent of the selected subset answered correctly),
//! average backend calls, abstention counts, average final-response length
//! in words, and — for methods that prune — per-level premise statistics
//! measured against stored ground truth, with the hypothesis counted as a
//! relevant premise.
//!
//! Workers run cells in parallel up to `parallelism`; the single trace
//! writer serializes completions back into deterministic order, so the
//! trace file layout does not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{
    Backend, BackendError, NoisyBackend, PromptTemplates, RemoteBackend, RemoteConfig,
    SymbolicBackend,
};
use crate::lang::{parse_task, Task, TaskError};
use crate::pipeline::{run_method, task_key, IpmMode, Method, PipelineTrace, Verdict};

/// Which backend an experiment talks to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// The exact reasoning oracle.
    Symbolic,
    /// The oracle with relevance decisions flipped at probability `p`
    /// (seeded from the experiment seed).
    Noisy { p: f64 },
    /// A chat-completion HTTP endpoint.
    Remote(RemoteConfig),
}

impl BackendSpec {
    /// Instantiates the backend. The experiment seed drives noisy flips.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Backend>, HarnessError> {
        match self {
            BackendSpec::Symbolic => Ok(Box::new(SymbolicBackend)),
            BackendSpec::Noisy { p } => {
                if !(0.0..=1.0).contains(p) || !p.is_finite() {
                    return Err(HarnessError::InvalidSpec(format!(
                        "noise probability must lie in [0, 1], got {p}"
                    )));
                }
                Ok(Box::new(NoisyBackend::new(*p, seed)))
            }
            BackendSpec::Remote(config) => {
                Ok(Box::new(RemoteBackend::new(config.clone())?))
            }
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Symbolic => f.write_str("symbolic"),
            BackendSpec::Noisy { p } => write!(f, "noisy:{p}"),
            BackendSpec::Remote(c) => write!(f, "remote(model={})", c.model),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "symbolic" => Ok(BackendSpec::Symbolic),
            "noisy" => Err("noisy needs a probability, e.g. noisy:0.1".to_string()),
            "remote" => {
                Err("remote backends need endpoint and model settings, not a bare name".to_string())
            }
            other => match other.strip_prefix("noisy:") {
                Some(p) => {
                    let p: f64 =
                        p.parse().map_err(|_| format!("bad noise probability {p:?}"))?;
                    Ok(BackendSpec::Noisy { p })
                }
                None => Err(format!("unknown backend {other:?} (expected symbolic, noisy:p, or remote)")),
            },
        }
    }
}

/// Everything one experiment run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// JSON-lines task file.
    pub dataset: PathBuf,
    /// How many tasks to evaluate: the first `subset` records in file
    /// order.
    pub subset: usize,
    pub methods: Vec<Method>,
    pub backend: BackendSpec,
    /// Concurrent (task, method) cells in flight.
    pub parallelism: usize,
    /// Receives `traces.jsonl`, `report.json`, and `report.txt`.
    pub out_dir: PathBuf,
    /// Drives noisy-backend flips; inert for other backends.
    pub seed: u64,
    pub ipm_mode: IpmMode,
    /// Directory of prompt template overrides; `None` uses the built-ins.
    pub template_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub const DEFAULT_SUBSET: usize = 100;

    pub fn new(dataset: impl Into<PathBuf>, methods: Vec<Method>, backend: BackendSpec, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            dataset: dataset.into(),
            subset: Self::DEFAULT_SUBSET,
            methods,
            backend,
            parallelism: 1,
            out_dir: out_dir.into(),
            seed: 0,
            ipm_mode: IpmMode::default(),
            template_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() {
            return Err(HarnessError::InvalidSpec("no methods selected".to_string()));
        }
        let mut seen = BTreeMap::new();
        for m in &self.methods {
            if seen.insert(m, ()).is_some() {
                return Err(HarnessError::InvalidSpec(format!("method {m} listed twice")));
            }
        }
        if self.parallelism == 0 {
            return Err(HarnessError::InvalidSpec("parallelism must be at least 1".to_string()));
        }
        if let BackendSpec::Noisy { p } = self.backend {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(HarnessError::InvalidSpec(format!(
                    "noise probability must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }

    fn traces_path(&self) -> PathBuf {
        self.out_dir.join("traces.jsonl")
    }

    fn report_json_path(&self) -> PathBuf {
        self.out_dir.join("report.json")
    }

    fn report_text_path(&self) -> PathBuf {
        self.out_dir.join("report.txt")
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("dataset line {line}: {source}")]
    Dataset {
        line: usize,
        #[source]
        source: TaskError,
    },
    #[error("trace line {line}: {reason}")]
    StaleTrace { line: usize, reason: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-method aggregate row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Cells of this method with a trace.
    pub completed: usize,
    pub correct: usize,
    /// Percent correct over the whole selected subset; cells without a
    /// trace count as incorrect.
    pub success_rate: f64,
    /// Backend calls per completed cell.
    pub avg_calls: f64,
    pub abstentions: usize,
    /// Whitespace-delimited words in the final call's raw response,
    /// averaged over completed cells that made at least one call.
    pub avg_response_length_words: f64,
}

/// Premise bookkeeping for one (pruning method, level) group: averages of
/// irrelevant and relevant items over `P* = premises ∪ {hypothesis}`,
/// before and after IPM, with the hypothesis counted as a relevant premise
/// when the ground truth marks it so.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpmStatsRow {
    pub method: Method,
    pub level: u32,
    pub tasks: usize,
    pub avg_irrelevant_before: f64,
    pub avg_irrelevant_after: f64,
    pub avg_relevant_before: f64,
    pub avg_relevant_after: f64,
}

/// Result of [`compute_ipm_stats`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IpmStats {
    /// Sorted by (method, level).
    pub rows: Vec<IpmStatsRow>,
    /// Traces whose task carries no ground truth; excluded from `rows`.
    pub missing_ground_truth: usize,
}

/// Average words per final response for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStat {
    pub method: Method,
    pub responses: usize,
    pub avg_words: f64,
}

/// The complete outcome of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub spec: ExperimentSpec,
    /// SHA-256 of the dataset file's bytes.
    pub dataset_sha256: String,
    /// SHA-256 per prompt template, keyed by template name.
    pub template_hashes: BTreeMap<String, String>,
    /// Human-readable backend identity.
    pub backend: String,
    /// Tasks actually selected (≤ `spec.subset`).
    pub subset_size: usize,
    pub expected_cells: usize,
    pub completed_cells: usize,
    /// Cells with no trace — nonzero only for interrupted runs.
    pub incomplete_cells: usize,
    /// Ordered as `spec.methods`.
    pub methods: Vec<MethodReport>,
    pub ipm_stats: IpmStats,
}

/// Loads the first `subset` tasks and hashes the whole file.
fn load_dataset(path: &Path, subset: usize) -> Result<(Vec<Task>, String), HarnessError> {
    let bytes = std::fs::read(path)?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|e| HarnessError::InvalidSpec(format!("dataset is not UTF-8: {e}")))?;
    let mut tasks = Vec::new();
    for (at, line) in text.lines().enumerate() {
        if tasks.len() == subset {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let task =
            parse_task(line).map_err(|source| HarnessError::Dataset { line: at + 1, source })?;
        tasks.push(task);
    }
    Ok((tasks, sha256))
}

/// Reads prior traces for resume. Lines for unknown methods or indices past
/// the subset are ignored; a task-key mismatch is fatal because it means
/// the trace file belongs to different data.
fn read_resume(
    path: &Path,
    tasks: &[Task],
    methods: &[Method],
) -> Result<BTreeMap<(usize, Method), PipelineTrace>, HarnessError> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let reader = BufReader::new(File::open(path)?);
    for (at, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trace: PipelineTrace = serde_json::from_str(&line).map_err(|e| {
            HarnessError::StaleTrace { line: at + 1, reason: format!("unparseable trace: {e}") }
        })?;
        let Some(task) = tasks.get(trace.task_index) else { continue };
        if task_key(task) != trace.task_key {
            return Err(HarnessError::StaleTrace {
                line: at + 1,
                reason: format!(
                    "task {} has key {} but the trace was recorded against {}; \
                     the dataset changed under the output directory",
                    trace.task_index,
                    task_key(task),
                    trace.task_key
                ),
            });
        }
        if !methods.contains(&trace.method) {
            continue;
        }
        let key = (trace.task_index, trace.method);
        // Later lines supersede earlier ones at the same or higher attempt.
        if done.get(&key).map_or(true, |prev| trace.attempt >= prev.attempt) {
            done.insert(key, trace);
        }
    }
    Ok(done)
}

/// Runs every missing cell and writes `traces.jsonl`, `report.json`, and
/// `report.txt` under the spec's output directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<EvalReport, HarnessError> {
    spec.validate()?;
    let (tasks, dataset_sha256) = load_dataset(&spec.dataset, spec.subset)?;
    let templates = match &spec.template_dir {
        Some(dir) => PromptTemplates::from_dir(dir)?,
        None => PromptTemplates::defaults(),
    };
    let backend = spec.backend.build(spec.seed)?;
    std::fs::create_dir_all(&spec.out_dir)?;

    let traces_path = spec.traces_path();
    let mut done = read_resume(&traces_path, &tasks, &spec.methods)?;

    let pending: Vec<(usize, Method)> = (0..tasks.len())
        .flat_map(|i| spec.methods.iter().map(move |m| (i, *m)))
        .filter(|cell| !done.contains_key(cell))
        .collect();

    if !pending.is_empty() {
        let mut writer = OpenOptions::new().create(true).append(true).open(&traces_path)?;
        let cursor = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<(usize, PipelineTrace)>();
        let workers = spec.parallelism.min(pending.len());
        let new_traces = std::thread::scope(|scope| -> Result<Vec<PipelineTrace>, HarnessError> {
            for _ in 0..workers {
                let tx = tx.clone();
                let (backend, templates, tasks, pending, cursor) =
                    (backend.as_ref(), &templates, &tasks, &pending, &cursor);
                scope.spawn(move || loop {
                    let at = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some(&(task_index, method)) = pending.get(at) else { break };
                    let trace = run_method(
                        backend,
                        templates,
                        method,
                        &tasks[task_index],
                        task_index,
                        spec.ipm_mode,
                    );
                    if tx.send((at, trace)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);

            // Reorder completions so the file layout is deterministic, and
            // flush per line so an interrupt loses at most the cell in
            // flight.
            let mut finished = Vec::with_capacity(pending.len());
            let mut buffer: BTreeMap<usize, PipelineTrace> = BTreeMap::new();
            let mut next = 0usize;
            for (at, trace) in rx {
                buffer.insert(at, trace);
                while let Some(trace) = buffer.remove(&next) {
                    let mut line = serde_json::to_string(&trace).expect("traces serialize");
                    line.push('\n');
                    writer.write_all(line.as_bytes())?;
                    writer.flush()?;
                    finished.push(trace);
                    next += 1;
                }
            }
            Ok(finished)
        })?;
        for trace in new_traces {
            done.insert((trace.task_index, trace.method), trace);
        }
    }

    let report = aggregate(
        spec,
        &tasks,
        &dataset_sha256,
        templates.hashes(),
        &backend.describe(),
        &done,
    );
    write_report(spec, &report)?;
    Ok(report)
}

/// Re-aggregates an experiment directory from its stored spec and traces,
/// rewriting the report files. The result is byte-identical to the report
/// an uninterrupted [`run_experiment`] writes.
pub fn recompute_report(out_dir: &Path) -> Result<EvalReport, HarnessError> {
    let stored = std::fs::read_to_string(out_dir.join("report.json"))?;
    let prior: EvalReport = serde_json::from_str(&stored)
        .map_err(|e| HarnessError::InvalidSpec(format!("unreadable report.json: {e}")))?;
    let spec = prior.spec;
    spec.validate()?;
    let (tasks, dataset_sha256) = load_dataset(&spec.dataset, spec.subset)?;
    let templates = match &spec.template_dir {
        Some(dir) => PromptTemplates::from_dir(dir)?,
        None => PromptTemplates::defaults(),
    };
    let backend = spec.backend.build(spec.seed)?;
    let done = read_resume(&spec.traces_path(), &tasks, &spec.methods)?;
    let report = aggregate(
        &spec,
        &tasks,
        &dataset_sha256,
        templates.hashes(),
        &backend.describe(),
        &done,
    );
    write_report(&spec, &report)?;
    Ok(report)
}

fn write_report(spec: &ExperimentSpec, report: &EvalReport) -> Result<(), HarnessError> {
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    std::fs::write(spec.report_json_path(), json)?;
    std::fs::write(spec.report_text_path(), render_text(report))?;
    Ok(())
}

/// Pure fold from traces to report: same inputs, same bytes out.
pub fn aggregate(
    spec: &ExperimentSpec,
    tasks: &[Task],
    dataset_sha256: &str,
    template_hashes: BTreeMap<String, String>,
    backend: &str,
    cells: &BTreeMap<(usize, Method), PipelineTrace>,
) -> EvalReport {
    let subset_size = tasks.len();
    let expected_cells = subset_size * spec.methods.len();

    let methods = spec
        .methods
        .iter()
        .map(|&method| {
            let traces: Vec<&PipelineTrace> =
                cells.iter().filter(|((_, m), _)| *m == method).map(|(_, t)| t).collect();
            let completed = traces.len();
            let correct = traces.iter().filter(|t| t.correct).count();
            let abstentions =
                traces.iter().filter(|t| t.verdict == Verdict::Abstained).count();
            let total_calls: usize = traces.iter().map(|t| t.calls.len()).sum();
            let lengths: Vec<usize> =
                traces.iter().filter_map(|t| response_words(t)).collect();
            MethodReport {
                method,
                completed,
                correct,
                success_rate: percent(correct, subset_size),
                avg_calls: mean(total_calls, completed),
                abstentions,
                avg_response_length_words: mean(lengths.iter().sum(), lengths.len()),
            }
        })
        .collect();

    let ipm_stats = compute_ipm_stats(cells.values(), tasks);
    let completed_cells = cells.len();
    EvalReport {
        schema_version: 1,
        spec: spec.clone(),
        dataset_sha256: dataset_sha256.to_string(),
        template_hashes,
        backend: backend.to_string(),
        subset_size,
        expected_cells,
        completed_cells,
        incomplete_cells: expected_cells - completed_cells,
        methods,
        ipm_stats,
    }
}

/// Words in the final call's raw response, if the trace made any call.
fn response_words(trace: &PipelineTrace) -> Option<usize> {
    trace.calls.last().map(|c| c.raw_response.split_whitespace().count())
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 * 100.0 / whole as f64
    }
}

fn mean(sum: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Per-(method, level) premise retention statistics for traces that pruned,
/// measured against each task's stored ground truth.
pub fn compute_ipm_stats<'a>(
    traces: impl IntoIterator<Item = &'a PipelineTrace>,
    tasks: &[Task],
) -> IpmStats {
    struct Acc {
        tasks: usize,
        irrelevant_before: usize,
        irrelevant_after: usize,
        relevant_before: usize,
        relevant_after: usize,
    }
    let mut groups: BTreeMap<(Method, u32), Acc> = BTreeMap::new();
    let mut missing = 0usize;

    for trace in traces {
        let Some(kept) = &trace.kept_premises else { continue };
        let Some(task) = tasks.get(trace.task_index) else { continue };
        let Some(gt) = &task.meta else {
            missing += 1;
            continue;
        };
        let kept_hyp = trace.kept_hypothesis.unwrap_or(false);
        let hyp_is_premise = task.premises.contains(&task.possible_cause);
        let pstar_items = task.premises.len() + usize::from(!hyp_is_premise);

        let relevant_before = gt.relevant_premises.len() + usize::from(gt.hypothesis_relevant);
        let relevant_kept =
            kept.iter().filter(|i| gt.relevant_premises.contains(i)).count();
        let relevant_after = relevant_kept + usize::from(kept_hyp && gt.hypothesis_relevant);
        let kept_items = kept.len() + usize::from(kept_hyp && !hyp_is_premise);
        debug_assert!(kept_items <= pstar_items);

        let acc = groups.entry((trace.method, gt.level)).or_insert(Acc {
            tasks: 0,
            irrelevant_before: 0,
            irrelevant_after: 0,
            relevant_before: 0,
            relevant_after: 0,
        });
        acc.tasks += 1;
        acc.relevant_before += relevant_before;
        acc.relevant_after += relevant_after;
        acc.irrelevant_before += pstar_items - relevant_before;
        acc.irrelevant_after += kept_items - relevant_after;
    }

    IpmStats {
        rows: groups
            .into_iter()
            .map(|((method, level), acc)| IpmStatsRow {
                method,
                level,
                tasks: acc.tasks,
                avg_irrelevant_before: mean(acc.irrelevant_before, acc.tasks),
                avg_irrelevant_after: mean(acc.irrelevant_after, acc.tasks),
                avg_relevant_before: mean(acc.relevant_before, acc.tasks),
                avg_relevant_after: mean(acc.relevant_after, acc.tasks),
            })
            .collect(),
        missing_ground_truth: missing,
    }
}

/// Average final-response length per method, sorted by method.
pub fn compute_length_stats<'a>(
    traces: impl IntoIterator<Item = &'a PipelineTrace>,
) -> Vec<LengthStat> {
    let mut groups: BTreeMap<Method, (usize, usize)> = BTreeMap::new();
    for trace in traces {
        if let Some(words) = response_words(trace) {
            let (n, sum) = groups.entry(trace.method).or_insert((0, 0));
            *n += 1;
            *sum += words;
        }
    }
    groups
        .into_iter()
        .map(|(method, (n, sum))| LengthStat { method, responses: n, avg_words: mean(sum, n) })
        .collect()
}

/// Human-readable table mirroring the report.
fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("Backend: {}\n", report.backend));
    out.push_str(&format!(
        "Dataset: {} ({} tasks, sha256 {})\n",
        report.spec.dataset.display(),
        report.subset_size,
        &report.dataset_sha256[..12.min(report.dataset_sha256.len())]
    ));
    if report.incomplete_cells > 0 {
        out.push_str(&format!(
            "NOTE: {} of {} cells have no trace; run again to complete them.\n",
            report.incomplete_cells, report.expected_cells
        ));
    }
    out.push('\n');
    out.push_str(&format!(
        "{:<15} {:>16} {:>10} {:>12} {:>20}\n",
        "Method", "Success Rate (%)", "Avg Calls", "Abstentions", "Avg Length (words)"
    ));
    for m in &report.methods {
        out.push_str(&format!(
            "{:<15} {:>16.2} {:>10.2} {:>12} {:>20.1}\n",
            m.method.to_string(),
            m.success_rate,
            m.avg_calls,
            m.abstentions,
            m.avg_response_length_words
        ));
    }
    if !report.ipm_stats.rows.is_empty() {
        out.push('\n');
        out.push_str("Premise retention around IPM (relevant counts include the hypothesis)\n");
        out.push_str(&format!(
            "{:<10} {:>5} {:>6} {:>17} {:>8} {:>15} {:>8}\n",
            "Method", "Level", "Tasks", "Irrelevant Before", "After", "Relevant Before", "After"
        ));
        for row in &report.ipm_stats.rows {
            out.push_str(&format!(
                "{:<10} {:>5} {:>6} {:>17.2} {:>8.2} {:>15.2} {:>8.2}\n",
                row.method.to_string(),
                row.level,
                row.tasks,
                row.avg_irrelevant_before,
                row.avg_irrelevant_after,
                row.avg_relevant_before,
                row.avg_relevant_after
            ));
        }
    }
    if report.ipm_stats.missing_ground_truth > 0 {
        out.push_str(&format!(
            "NOTE: {} pruned traces had no ground truth and are excluded from premise statistics.\n",
            report.ipm_stats.missing_ground_truth
        ));
    }
    out
}
