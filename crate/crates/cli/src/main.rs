//! `lfprobe` command line: one verb per module operation.
//!
//! Data goes to stdout (or `--out`), diagnostics to stderr. Exit codes:
//! 0 success, 1 usage, 2 data or validation, 3 backend.

use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lfprobe::fl_ast::{FormalProgram, Language};
use lfprobe::harness::{
    build_gateway, emit_report, gold_outputs, ingest, native_row, render_json, render_markdown, run_generation,
    run_sweep, run_understanding, sample_seed, seed_set, DatasetKind, ExperimentReport, HarnessError, ReportFormat,
    RunConfig, RunContext,
};
use lfprobe::kb_link::{build_name_index, hop_context, link_program, load_vocab, vocab_from_kb, NameIndex, NameKind};
use lfprobe::kopl_engine::{execute, ToyKB};
use lfprobe::llm::GatewayError;
use lfprobe::prompt::{build_zero_shot_prompt, PromptTemplates, Task};
use lfprobe::retrieval::{
    build_bm25_index, build_skeleton_index, select_lf_demos, select_nlq_demos, SeedExample, SeedSet, SelectOptions,
};
use lfprobe::skeleton::{mask_nlq, skeleton_of};
use serde_json::{json, Map, Value};

#[derive(Debug, Parser)]
#[command(
    name = "lfprobe",
    version,
    about = "Probe LLM understanding and generation of formal languages"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Understanding,
    Generation,
    ZeroShotUnderstanding,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Understanding => Task::Understanding,
            TaskArg::Generation => Task::Generation,
            TaskArg::ZeroShotUnderstanding => Task::ZeroShotUnderstanding,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Entity,
    Relation,
    Concept,
}

impl From<KindArg> for NameKind {
    fn from(k: KindArg) -> NameKind {
        match k {
            KindArg::Entity => NameKind::Entity,
            KindArg::Relation => NameKind::Relation,
            KindArg::Concept => NameKind::Concept,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Markdown,
}

/// Options shared by every verb. Flags override the config file, which
/// overrides built-in defaults.
#[derive(Debug, Default, Args)]
struct Common {
    /// Formal language: kopl, sparql or lambda_dcs.
    #[arg(long, global = true, value_parser = parse_language)]
    language: Option<Language>,
    #[arg(long, global = true, value_enum)]
    task: Option<TaskArg>,
    /// Number of demonstrations.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    seed_ratio: Option<f64>,
    #[arg(long, global = true)]
    rng_seed: Option<u64>,
    /// `mock:echo_gold`, `mock:copy_demo`, `mock:fixed:TEXT`,
    /// `mock:corrupt:RATE[:SEED]` or `remote`.
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true)]
    entity_linking: bool,
    /// Toy KB document (JSON).
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    /// Name vocabulary (JSONL).
    #[arg(long, global = true)]
    vocab: Option<PathBuf>,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or output directory for `run`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InputArg {
    /// Input file, `-` for stdin.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Seed pool in a native dataset format.
    #[arg(long)]
    seeds: PathBuf,
    /// Dataset format of the seed pool; defaults to the language's dataset.
    #[arg(long)]
    dataset: Option<String>,
    /// Gold mention in the target question (repeatable).
    #[arg(long = "mention")]
    mentions: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Parse a logical form and print its serializations.
    Parse(InputArg),
    /// Print the skeleton of a logical form, or the masked question.
    Skeleton {
        #[command(flatten)]
        input: InputArg,
        /// S-expression companion of a SPARQL query.
        #[arg(long)]
        sexpr: Option<PathBuf>,
        /// Treat the input as a question and mask these mentions.
        #[arg(long = "mention")]
        mentions: Vec<String>,
        #[arg(long)]
        question: bool,
    },
    /// Select demonstrations for a target.
    Retrieve {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Build the full prompt for a target.
    Prompt {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        seeds: SeedArgs,
        /// Prompt template overrides (JSON).
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Execute a KoPL program against a KB.
    Execute(InputArg),
    /// Link a name, or every name in a logical form when `--language` is set.
    Link {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// Number of candidates printed for a single name.
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Run an experiment and write its report.
    Run {
        /// Target records in a native dataset format.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Seed pool; sampled from the targets by `--seed-ratio` when absent.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Run the demo-count sweep from the config (or the standard grid).
        #[arg(long)]
        sweep: bool,
    },
    /// Re-render a JSON report.
    Report {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
    },
}

fn parse_language(s: &str) -> Result<Language, String> {
    s.parse()
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(common: &Common, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &common.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_language(common: &Common) -> Result<Language> {
    common
        .language
        .ok_or_else(|| usage("--language is required for this verb"))
}

fn dataset_kind(name: Option<&str>, language: Language) -> Result<DatasetKind> {
    match name {
        Some(n) => DatasetKind::parse(n).ok_or_else(|| usage(format!("unknown dataset {n:?}"))),
        None => Ok(DatasetKind::for_language(language)),
    }
}

fn load_seeds(args: &SeedArgs, language: Language) -> Result<SeedSet> {
    let kind = dataset_kind(args.dataset.as_deref(), language)?;
    let report = ingest(kind, &args.seeds)?;
    for s in &report.skipped {
        log::warn!("seed record {} skipped: {}", s.index, s.reason);
    }
    Ok(seed_set(&report.records)?)
}

fn load_kb(common: &Common) -> Result<Option<ToyKB>> {
    common
        .kb
        .as_deref()
        .map(|p| ToyKB::load(p).map_err(Into::into))
        .transpose()
}

fn load_index(common: &Common, kb: Option<&ToyKB>) -> Result<Option<NameIndex>> {
    let vocab = match (&common.vocab, kb) {
        (Some(p), _) => load_vocab(p)?,
        (None, Some(kb)) => vocab_from_kb(kb),
        (None, None) => return Ok(None),
    };
    Ok(Some(build_name_index(vocab)?))
}

fn load_templates(path: Option<&Path>) -> Result<PromptTemplates> {
    Ok(match path {
        Some(p) => PromptTemplates::load(p)?,
        None => PromptTemplates::default(),
    })
}

fn parse_program(language: Language, text: &str, sexpr: Option<&str>) -> Result<FormalProgram> {
    let text = text.trim();
    Ok(match (language, sexpr) {
        (Language::Sparql, Some(s)) => FormalProgram::parse_sparql_with_sexpr(text, s.trim())?,
        _ => FormalProgram::parse(language, text)?,
    })
}

fn demo_json(demos: &[&SeedExample]) -> Value {
    demos
        .iter()
        .map(|d| json!({"id": d.id, "question": d.question, "program": d.program.canonical()}))
        .collect()
}

/// Demos for one target, chosen the way the harness chooses them.
fn select_demos<'a>(
    common: &Common,
    target: &str,
    seeds: &'a SeedSet,
    mentions: &[String],
) -> Result<Vec<&'a SeedExample>> {
    let language = require_language(common)?;
    let k = common.k.unwrap_or(3);
    let opts = SelectOptions::default();
    match task_of(common) {
        Task::Generation => {
            let index = build_bm25_index(seeds)?;
            Ok(select_nlq_demos(target.trim(), mentions, seeds, &index, k, &opts)?)
        }
        Task::Understanding => {
            let program = parse_program(language, target, None)?;
            let index = build_skeleton_index(seeds)?;
            Ok(select_lf_demos(&program, seeds, &index, k, &opts)?)
        }
        Task::ZeroShotUnderstanding => Ok(Vec::new()),
    }
}

fn task_of(common: &Common) -> Task {
    common.task.map(Task::from).unwrap_or(Task::Generation)
}

fn cmd_parse(common: &Common, input: &InputArg) -> Result<()> {
    let language = require_language(common)?;
    let program = parse_program(language, &read_input(&input.input)?, None)?;
    let out = json!({
        "language": language.as_str(),
        "canonical": program.canonical(),
        "understanding": program.understanding_text(),
        "generation": program.generation_text(),
    });
    emit(common, &serde_json::to_string_pretty(&out)?)
}

fn cmd_skeleton(
    common: &Common,
    input: &InputArg,
    sexpr: Option<&Path>,
    mentions: &[String],
    question: bool,
) -> Result<()> {
    let text = read_input(&input.input)?;
    if question || !mentions.is_empty() {
        return emit(common, &mask_nlq(text.trim(), mentions).text);
    }
    let language = require_language(common)?;
    let sexpr = sexpr.map(read_input).transpose()?;
    let program = parse_program(language, &text, sexpr.as_deref())?;
    emit(common, &skeleton_of(&program)?.text)
}

fn cmd_retrieve(common: &Common, input: &InputArg, args: &SeedArgs) -> Result<()> {
    let language = require_language(common)?;
    let seeds = load_seeds(args, language)?;
    let demos = select_demos(common, &read_input(&input.input)?, &seeds, &args.mentions)?;
    emit(common, &serde_json::to_string_pretty(&demo_json(&demos))?)
}

fn cmd_prompt(common: &Common, input: &InputArg, args: &SeedArgs, templates: Option<&Path>) -> Result<()> {
    let language = require_language(common)?;
    let templates = load_templates(templates)?;
    let target = read_input(&input.input)?;
    let target = target.trim();
    let prompt = match task_of(common) {
        Task::ZeroShotUnderstanding => {
            let program = parse_program(language, target, None)?;
            build_zero_shot_prompt(&program.understanding_text(), language)?
        }
        Task::Understanding => {
            let seeds = load_seeds(args, language)?;
            let demos = select_demos(common, target, &seeds, &args.mentions)?;
            let pairs: Vec<(String, String)> = demos
                .iter()
                .map(|d| (d.program.understanding_text(), d.question.clone()))
                .collect();
            let program = parse_program(language, target, None)?;
            templates.understanding(&program.understanding_text(), &pairs, language)
        }
        Task::Generation => {
            let seeds = load_seeds(args, language)?;
            let demos = select_demos(common, target, &seeds, &args.mentions)?;
            let pairs: Vec<(String, String)> = demos
                .iter()
                .map(|d| (d.question.clone(), d.program.generation_text()))
                .collect();
            let block = match (common.entity_linking, load_kb(common)?) {
                (true, Some(kb)) => {
                    let mut names = std::collections::BTreeSet::new();
                    for m in &args.mentions {
                        for &e in kb.entities_named(m) {
                            names.extend(hop_context(&kb, &kb.entities[e].id, 2)?);
                        }
                    }
                    templates.kb_block(&names.into_iter().collect::<Vec<_>>())
                }
                _ => String::new(),
            };
            templates.generation(target, &pairs, language, &block)
        }
    };
    emit(common, &prompt.text)
}

fn cmd_execute(common: &Common, input: &InputArg) -> Result<()> {
    let kb = load_kb(common)?.ok_or_else(|| usage("--kb is required for execute"))?;
    let program = parse_program(Language::Kopl, &read_input(&input.input)?, None)?;
    let program = program.as_kopl().expect("parsed as KoPL");
    emit(common, &execute(program, &kb)?.to_text())
}

fn cmd_link(common: &Common, input: &InputArg, kind: Option<KindArg>, top: usize) -> Result<()> {
    let kb = load_kb(common)?;
    let index = load_index(common, kb.as_ref())?.ok_or_else(|| usage("--vocab or --kb is required for link"))?;
    let text = read_input(&input.input)?;
    let out = match common.language {
        Some(language) => {
            let program = parse_program(language, &text, None)?;
            let (linked, report) = link_program(&program, &index);
            json!({"program": linked.canonical(), "replaced": report.replaced, "unlinked": report.unlinked})
        }
        None => serde_json::to_value(index.search(text.trim(), kind.map(NameKind::from), top))?,
    };
    emit(common, &serde_json::to_string_pretty(&out)?)
}

/// Keys a config file may carry besides the run configuration; paths are
/// relative to the config file.
const PATH_KEYS: [&str; 6] = ["targets", "seeds", "dataset", "kb", "vocab", "templates"];

struct Resolved {
    config: RunConfig,
    paths: Map<String, Value>,
    base: PathBuf,
}

/// Defaults, then the config file, then flags.
fn resolve_config(common: &Common) -> Result<Resolved> {
    let task = task_of(common);
    let language = common.language.unwrap_or(Language::Kopl);
    let mut merged = match serde_json::to_value(RunConfig::new(task, language))? {
        Value::Object(m) => m,
        _ => unreachable!("config serializes to an object"),
    };
    let mut paths = Map::new();
    let mut base = PathBuf::from(".");
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let Value::Object(file) =
            serde_json::from_str::<Value>(&text).map_err(|e| HarnessError::Json(e.to_string()))?
        else {
            return Err(HarnessError::Config("config file must hold a JSON object".into()).into());
        };
        for (k, v) in file {
            if PATH_KEYS.contains(&k.as_str()) {
                paths.insert(k, v);
            } else {
                merged.insert(k, v);
            }
        }
        base = path.parent().map(Path::to_path_buf).unwrap_or(base);
    }
    let mut set = |k: &str, v: Value| {
        merged.insert(k.to_string(), v);
    };
    if let Some(t) = common.task {
        set("task", serde_json::to_value(Task::from(t))?);
    }
    if let Some(l) = common.language {
        set("language", serde_json::to_value(l)?);
    }
    if let Some(k) = common.k {
        set("k", json!(k));
    }
    if let Some(r) = common.seed_ratio {
        set("seed_ratio", json!(r));
    }
    if let Some(s) = common.rng_seed {
        set("rng_seed", json!(s));
    }
    if let Some(b) = &common.backend {
        set("backend", json!(b));
    }
    if common.entity_linking {
        set("entity_linking", json!(true));
    }
    let config: RunConfig =
        serde_json::from_value(Value::Object(merged)).map_err(|e| HarnessError::Config(e.to_string()))?;
    config.validate()?;
    Ok(Resolved { config, paths, base })
}

impl Resolved {
    /// A flag path wins over the config file entry.
    fn path(&self, flag: Option<&Path>, key: &str) -> Option<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.paths.get(key).and_then(Value::as_str).map(|p| self.base.join(p)))
    }
}

fn cmd_run(
    common: &Common,
    targets: Option<&Path>,
    seeds: Option<&Path>,
    dataset: Option<&str>,
    templates: Option<&Path>,
    sweep: bool,
) -> Result<()> {
    let resolved = resolve_config(common)?;
    let config = &resolved.config;
    let dataset = dataset.or_else(|| resolved.paths.get("dataset").and_then(Value::as_str));
    let kind = dataset_kind(dataset, config.language)?;
    let targets_path = resolved
        .path(targets, "targets")
        .ok_or_else(|| usage("--targets is required for run"))?;
    let ingested = ingest(kind, &targets_path)?;
    for s in &ingested.skipped {
        log::warn!("target record {} skipped: {}", s.index, s.reason);
    }
    let targets = ingested.records;
    let seeds = match resolved.path(seeds, "seeds") {
        Some(p) => seed_set(&ingest(kind, &p)?.records)?,
        None => sample_seed(&targets, config.seed_ratio, config.rng_seed)?,
    };
    let kb = resolved
        .path(common.kb.as_deref(), "kb")
        .map(|p| ToyKB::load(&p))
        .transpose()?;
    let vocab = match resolved.path(common.vocab.as_deref(), "vocab") {
        Some(p) => Some(build_name_index(load_vocab(&p)?)?),
        None => kb.as_ref().map(|kb| build_name_index(vocab_from_kb(kb))).transpose()?,
    };
    let templates = load_templates(resolved.path(templates, "templates").as_deref())?;
    let ctx = RunContext {
        config,
        seeds: &seeds,
        targets: &targets,
        kb: kb.as_ref(),
        vocab: vocab.as_ref(),
        templates: &templates,
    };
    log::info!(
        "{} {} over {} targets, {} seeds, backend {}",
        config.task.as_str(),
        config.language.as_str(),
        targets.len(),
        seeds.len(),
        config.backend
    );
    let mut pseudo = None;
    let report = if sweep || config.sweep.is_some() {
        run_sweep(
            &ctx,
            &config
                .sweep
                .clone()
                .unwrap_or_else(lfprobe::harness::SweepGrid::standard),
        )?
    } else {
        let gateway = build_gateway(config, gold_outputs(config.task, &targets), 0)?;
        match config.task {
            Task::Generation => run_generation(&ctx, &gateway)?,
            _ => {
                let (rows, report) = run_understanding(&ctx, &gateway)?;
                pseudo = Some(rows);
                report
            }
        }
    };
    match &common.out {
        Some(dir) => {
            for path in emit_report(&report, dir, "report", &[ReportFormat::Json, ReportFormat::Markdown])? {
                log::info!("wrote {}", path.display());
            }
            if let Some(rows) = &pseudo {
                let mut lines = String::new();
                for (row, target) in rows.iter().zip(&targets) {
                    let native = native_row(kind, target, row.question.as_deref(), row.failure.as_deref());
                    lines.push_str(&serde_json::to_string(&native)?);
                    lines.push('\n');
                }
                let path = dir.join("pseudo.jsonl");
                std::fs::write(&path, lines).with_context(|| format!("writing {}", path.display()))?;
                log::info!("wrote {}", path.display());
            }
        }
        None => print!("{}", render_json(&report)),
    }
    if !report.rows.is_empty() && report.failures == report.rows.len() {
        return Err(anyhow!(BackendFailure(report.failures)));
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
#[error("every one of the {0} requests failed at the backend")]
struct BackendFailure(usize);

fn cmd_report(common: &Common, input: &InputArg, format: FormatArg) -> Result<()> {
    let text = read_input(&input.input)?;
    let report: ExperimentReport = serde_json::from_str(&text).map_err(|e| HarnessError::Json(e.to_string()))?;
    let body = match format {
        FormatArg::Json => render_json(&report),
        FormatArg::Markdown => render_markdown(&report),
    };
    emit(common, &body)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.verb {
        Verb::Parse(input) => cmd_parse(common, input),
        Verb::Skeleton {
            input,
            sexpr,
            mentions,
            question,
        } => cmd_skeleton(common, input, sexpr.as_deref(), mentions, *question),
        Verb::Retrieve { input, seeds } => cmd_retrieve(common, input, seeds),
        Verb::Prompt {
            input,
            seeds,
            templates,
        } => cmd_prompt(common, input, seeds, templates.as_deref()),
        Verb::Execute(input) => cmd_execute(common, input),
        Verb::Link { input, kind, top } => cmd_link(common, input, *kind, *top),
        Verb::Run {
            targets,
            seeds,
            dataset,
            templates,
            sweep,
        } => cmd_run(
            common,
            targets.as_deref(),
            seeds.as_deref(),
            dataset.as_deref(),
            templates.as_deref(),
            *sweep,
        ),
        Verb::Report { input, format } => cmd_report(common, input, *format),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<GatewayError>() || cause.is::<BackendFailure>() {
            return 3;
        }
        if let Some(HarnessError::Gateway(_)) = cause.downcast_ref::<HarnessError>() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
