//! The `cj` command line: dataset generation, validation, import, experiment
//! runs, and report recomputation over the causejudger toolkit.
//!
//! Settings resolve in three layers — built-in defaults, then an optional
//! `--config` JSON file (the same schema the generator and harness
//! serialize), then explicit flags. The effective configuration is printed
//! before anything runs and is embedded in every manifest and report the
//! run writes. Nothing touches the filesystem until that configuration has
//! validated.
//!
//! Exit codes: 0 success, 1 validation or runtime failure, 2 usage errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use causejudger::backend::RemoteConfig;
use causejudger::generator::proofwriter::import_proofwriter;
use causejudger::generator::{generate_dataset, validate_task, GeneratorConfig};
use causejudger::harness::{run_experiment, recompute_report, BackendSpec, ExperimentSpec};
use causejudger::lang::{parse_task, serialize_task, Attribute, Entity};
use causejudger::pipeline::{IpmMode, Method};

#[derive(Parser)]
#[command(
    name = "cj",
    about = "Abductive cause judging over rule-based tasks",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an engine-verified dataset of graded tasks.
    Gen(GenArgs),
    /// Check every task in a dataset file and list integrity failures.
    Validate(ValidateArgs),
    /// Convert external abduction records into tasks.
    Import(ImportArgs),
    /// Run methods against a dataset and write traces and a report.
    Run(RunArgs),
    /// Recompute the report of an experiment directory from its traces.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Reasoning chain length, 1-4.
    #[arg(long)]
    level: Option<u32>,
    /// Tasks to generate.
    #[arg(long)]
    count: Option<usize>,
    /// Master seed (required: generation is never silently random).
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset file to write; the manifest lands beside it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    positive_fraction: Option<f64>,
    #[arg(long)]
    irrelevant_premises: Option<usize>,
    #[arg(long)]
    relevant_premises: Option<usize>,
    #[arg(long)]
    distractor_rules: Option<usize>,
    /// JSON file with GeneratorConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset file to check.
    path: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    /// Input format; only "proofwriter" is supported.
    #[arg(long)]
    format: String,
    /// Source records (JSON lines).
    input: PathBuf,
    /// Task file to write.
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated method list: cj, io, zero-shot-cot, sc-cot[:k],
    /// lrm-frm, ipm-only.
    #[arg(long)]
    methods: Option<String>,
    /// symbolic, noisy:<p>, or remote (remote needs --endpoint and --model).
    #[arg(long)]
    backend: Option<String>,
    /// Evaluate the first N tasks (default 100).
    #[arg(long)]
    subset: Option<usize>,
    /// Output directory for traces.jsonl, report.json, report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Required for noisy backends; defaults to 0 otherwise.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Chat-completion URL (remote backend only).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name (remote backend only).
    #[arg(long)]
    model: Option<String>,
    /// Sampling temperature (remote backend only).
    #[arg(long)]
    temperature: Option<f64>,
    /// "batched" (default) or "per-item" relevance judging.
    #[arg(long)]
    ipm_mode: Option<String>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    template_dir: Option<PathBuf>,
    /// JSON file with ExperimentSpec fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Experiment directory written by `cj run`.
    dir: PathBuf,
}

/// What a subcommand ended with, beyond plain success.
enum CliError {
    /// Bad flags or an invalid effective config; nothing was written.
    Usage(String),
    /// The work itself failed.
    Failure(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Failure(err)
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

/// Runs the CLI on `argv` (`argv[0]` is the program name) and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return 2;
        }
    };
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Import(args) => cmd_import(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            2
        }
        Err(CliError::Failure(err)) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

fn read_config_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("--config {}: {e}", path.display())))
}

/// GeneratorConfig with every field optional, for config files.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenFileConfig {
    level: Option<u32>,
    count: Option<usize>,
    seed: Option<u64>,
    positive_fraction: Option<f64>,
    irrelevant_premises: Option<usize>,
    relevant_premises: Option<usize>,
    distractor_rules: Option<usize>,
    entity_pool: Option<Vec<Entity>>,
    attribute_pool: Option<Vec<Attribute>>,
}

fn cmd_gen(args: GenArgs) -> Result<i32, CliError> {
    let file: GenFileConfig = match &args.config {
        Some(path) => read_config_file(path)?,
        None => GenFileConfig::default(),
    };
    let level = args.level.or(file.level).ok_or_else(|| usage("--level is required"))?;
    let count = args.count.or(file.count).ok_or_else(|| usage("--count is required"))?;
    let seed = args.seed.or(file.seed).ok_or_else(|| usage("--seed is required"))?;

    let mut config = GeneratorConfig::for_level(level, count, seed);
    if let Some(v) = file.positive_fraction {
        config.positive_fraction = v;
    }
    if let Some(v) = file.irrelevant_premises {
        config.irrelevant_premises = v;
    }
    if let Some(v) = file.relevant_premises {
        config.relevant_premises = v;
    }
    if let Some(v) = file.distractor_rules {
        config.distractor_rules = v;
    }
    if let Some(v) = file.entity_pool {
        config.entity_pool = v;
    }
    if let Some(v) = file.attribute_pool {
        config.attribute_pool = v;
    }
    if let Some(v) = args.positive_fraction {
        config.positive_fraction = v;
    }
    if let Some(v) = args.irrelevant_premises {
        config.irrelevant_premises = v;
    }
    if let Some(v) = args.relevant_premises {
        config.relevant_premises = v;
    }
    if let Some(v) = args.distractor_rules {
        config.distractor_rules = v;
    }
    config.validate().map_err(|e| usage(e.to_string()))?;

    println!(
        "effective config: {}",
        serde_json::to_string(&config).expect("config serializes")
    );
    let manifest =
        generate_dataset(&config, &args.out).context("generating dataset").map_err(CliError::from)?;
    println!(
        "wrote {} tasks ({} positive, {} negative) to {}",
        manifest.counts.total,
        manifest.counts.positive,
        manifest.counts.negative,
        args.out.display()
    );
    println!("sha256 {}", manifest.sha256);
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&args.path)
        .with_context(|| format!("reading {}", args.path.display()))
        .map_err(CliError::from)?;
    let mut tasks = 0usize;
    let mut failures = 0usize;
    for (at, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        tasks += 1;
        match parse_task(line) {
            Ok(task) => {
                for failure in validate_task(&task).failures {
                    println!("line {}: {failure}", at + 1);
                    failures += 1;
                }
            }
            Err(err) => {
                println!("line {}: parse: {err}", at + 1);
                failures += 1;
            }
        }
    }
    println!("checked {tasks} tasks: {failures} failures");
    Ok(if failures == 0 { 0 } else { 1 })
}

fn cmd_import(args: ImportArgs) -> Result<i32, CliError> {
    if args.format != "proofwriter" {
        return Err(usage(format!(
            "--format {:?} is not supported (expected \"proofwriter\")",
            args.format
        )));
    }
    let report = import_proofwriter(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))
        .map_err(CliError::from)?;
    let mut out = String::new();
    for task in &report.tasks {
        out.push_str(&serialize_task(task));
        out.push('\n');
    }
    std::fs::write(&args.output, out)
        .with_context(|| format!("writing {}", args.output.display()))
        .map_err(CliError::from)?;
    for skipped in &report.skipped {
        println!("skipped line {}: {}", skipped.line, skipped.reason);
    }
    println!(
        "imported {} of {} records to {}",
        report.tasks.len(),
        report.total(),
        args.output.display()
    );
    Ok(0)
}

/// ExperimentSpec with every field optional, for config files.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFileConfig {
    dataset: Option<PathBuf>,
    subset: Option<usize>,
    methods: Option<Vec<Method>>,
    backend: Option<BackendSpec>,
    parallelism: Option<usize>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    ipm_mode: Option<IpmMode>,
    template_dir: Option<PathBuf>,
}

fn parse_methods(list: &str) -> Result<Vec<Method>, CliError> {
    let methods: Result<Vec<Method>, String> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect();
    let methods = methods.map_err(|e| usage(format!("--methods: {e}")))?;
    if methods.is_empty() {
        return Err(usage("--methods lists no methods"));
    }
    Ok(methods)
}

fn build_spec(args: RunArgs) -> Result<ExperimentSpec, CliError> {
    let file: RunFileConfig = match &args.config {
        Some(path) => read_config_file(path)?,
        None => RunFileConfig::default(),
    };

    let dataset =
        args.dataset.or(file.dataset).ok_or_else(|| usage("--dataset is required"))?;
    let out_dir = args.out.or(file.out_dir).ok_or_else(|| usage("--out is required"))?;
    let methods = match (&args.methods, file.methods) {
        (Some(list), _) => parse_methods(list)?,
        (None, Some(methods)) => methods,
        (None, None) => return Err(usage("--methods is required")),
    };

    let mut backend = match (args.backend.as_deref(), file.backend) {
        (Some("remote"), Some(BackendSpec::Remote(config))) => BackendSpec::Remote(config),
        (Some("remote"), _) => BackendSpec::Remote(RemoteConfig::new("", "")),
        (Some(name), _) => name.parse().map_err(|e| usage(format!("--backend: {e}")))?,
        (None, Some(backend)) => backend,
        (None, None) => return Err(usage("--backend is required")),
    };
    let remote_flags =
        [args.endpoint.is_some(), args.model.is_some(), args.temperature.is_some()];
    match &mut backend {
        BackendSpec::Remote(config) => {
            if let Some(v) = args.endpoint {
                config.endpoint = v;
            }
            if let Some(v) = args.model {
                config.model = v;
            }
            if let Some(v) = args.temperature {
                config.temperature = v;
            }
            if config.endpoint.is_empty() {
                return Err(usage("remote backends need --endpoint"));
            }
            if config.model.is_empty() {
                return Err(usage("remote backends need --model"));
            }
        }
        _ if remote_flags.iter().any(|set| *set) => {
            return Err(usage("--endpoint/--model/--temperature require --backend remote"));
        }
        _ => {}
    }

    let seed = args.seed.or(file.seed);
    if matches!(backend, BackendSpec::Noisy { .. }) && seed.is_none() {
        return Err(usage("--seed is required with noisy backends"));
    }
    let ipm_mode = match args.ipm_mode.as_deref() {
        None => file.ipm_mode.unwrap_or_default(),
        Some("batched") => IpmMode::Batched,
        Some("per-item") | Some("per_item") => IpmMode::PerItem,
        Some(other) => {
            return Err(usage(format!(
                "--ipm-mode {other:?} (expected \"batched\" or \"per-item\")"
            )))
        }
    };

    let spec = ExperimentSpec {
        dataset,
        subset: args.subset.or(file.subset).unwrap_or(ExperimentSpec::DEFAULT_SUBSET),
        methods,
        backend,
        parallelism: args.parallelism.or(file.parallelism).unwrap_or(1),
        out_dir,
        seed: seed.unwrap_or(0),
        ipm_mode,
        template_dir: args.template_dir.or(file.template_dir),
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn cmd_run(args: RunArgs) -> Result<i32, CliError> {
    let spec = build_spec(args)?;
    println!(
        "effective config: {}",
        serde_json::to_string(&spec).expect("spec serializes")
    );
    let report = run_experiment(&spec).context("running experiment").map_err(CliError::from)?;
    let text = std::fs::read_to_string(spec.out_dir.join("report.txt"))
        .context("reading the report back")
        .map_err(CliError::from)?;
    print!("{text}");
    println!(
        "completed {} of {} cells; report at {}",
        report.completed_cells,
        report.expected_cells,
        spec.out_dir.join("report.json").display()
    );
    Ok(0)
}

fn cmd_report(args: ReportArgs) -> Result<i32, CliError> {
    let report = recompute_report(&args.dir)
        .with_context(|| format!("recomputing report in {}", args.dir.display()))
        .map_err(CliError::from)?;
    let text = std::fs::read_to_string(args.dir.join("report.txt"))
        .context("reading the report back")
        .map_err(CliError::from)?;
    print!("{text}");
    if report.incomplete_cells > 0 {
        println!(
            "{} of {} cells still lack traces; run `cj run` with the same spec to finish them",
            report.incomplete_cells, report.expected_cells
        );
    }
    Ok(0)
}
