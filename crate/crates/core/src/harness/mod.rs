//! End-to-end probing runs: seed sampling, the understanding and generation
//! tasks, scoring, demo-count sweeps and report emission.

pub mod ingest;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fl_ast::{normalize_ws, FormalProgram, KoplProgram, Language, ParseError};
use crate::kb_link::{hop_context, link_program, LinkError, NameIndex};
use crate::kopl_engine::{execute, ToyKB};
use crate::llm::{CompletionRequest, Gateway, GatewayError, MockBackend, MockMode, RemoteBackend, RemoteConfig};
use crate::prompt::{build_zero_shot_prompt, PromptError, PromptTemplates, Task};
use crate::retrieval::{
    build_bm25_index, build_skeleton_index, select_lf_demos, select_nlq_demos, RetrievalError, SeedExample, SeedSet,
    SelectOptions,
};
use crate::skeleton::{mask_nlq, SkeletonError};

pub use ingest::{ingest, ingest_str, native_row, CanonicalRecord, DatasetKind, EntityMention, IngestReport, LfField};
pub use report::{emit_report, render_json, render_markdown, ReportFormat};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("seed ratio {0} outside (0, 1]")]
    Ratio(f64),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("prompt for {id} has {chars} characters, over the {limit} limit")]
    PromptTooLong { id: String, chars: usize, limit: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub demo_counts: Vec<usize>,
    pub linking: Vec<bool>,
    pub runs: usize,
}

impl SweepGrid {
    /// Demo counts 0, 5, ..., 35, linking off and on, three runs.
    pub fn standard() -> SweepGrid {
        SweepGrid {
            demo_counts: (0..=35).step_by(5).collect(),
            linking: vec![false, true],
            runs: 3,
        }
    }
}

/// Parser accuracies supplied from an external training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParserAccuracy {
    pub model: f64,
    pub human: f64,
}

impl ParserAccuracy {
    /// Accuracy of the parser trained on model questions relative to the
    /// one trained on human questions.
    pub fn ratio(&self) -> Option<f64> {
        (self.human > 0.0).then(|| self.model / self.human)
    }
}

fn default_k() -> usize {
    3
}
fn default_ratio() -> f64 {
    0.01
}
fn default_backend() -> String {
    "mock:echo_gold".into()
}
fn default_in_flight() -> usize {
    4
}
fn default_radius() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub language: Language,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_ratio")]
    pub seed_ratio: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub entity_linking: bool,
    /// `mock:<mode>` (see `MockMode::parse`) or `remote`.
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteConfig>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Mask mentions in the target question of generation prompts.
    #[serde(default)]
    pub mask_target_question: bool,
    /// Prompts longer than this are not sent; sweep cells become empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_prompt_chars: Option<usize>,
    /// Hops around question entities for the knowledge block.
    #[serde(default = "default_radius")]
    pub kb_radius: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parser_accuracy: Option<ParserAccuracy>,
}

impl RunConfig {
    pub fn new(task: Task, language: Language) -> RunConfig {
        RunConfig {
            task,
            language,
            k: default_k(),
            seed_ratio: default_ratio(),
            rng_seed: 0,
            entity_linking: false,
            backend: default_backend(),
            sweep: None,
            remote: None,
            max_in_flight: default_in_flight(),
            mask_target_question: false,
            max_prompt_chars: None,
            kb_radius: default_radius(),
            parser_accuracy: None,
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| HarnessError::Json(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.seed_ratio > 0.0 && self.seed_ratio <= 1.0) {
            return Err(HarnessError::Ratio(self.seed_ratio));
        }
        if self.task == Task::ZeroShotUnderstanding && self.language != Language::Kopl {
            return Err(PromptError::ZeroShotLanguage(self.language).into());
        }
        if self.max_in_flight == 0 {
            return Err(HarnessError::Config("max_in_flight must be positive".into()));
        }
        Ok(())
    }
}

/// Positions of a uniform sample of `floor(ratio * n)` items, in input order.
pub fn sample_indices(n: usize, ratio: f64, rng_seed: u64) -> Result<Vec<usize>, HarnessError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(HarnessError::Ratio(ratio));
    }
    // the epsilon keeps exact products such as 0.01 * 20000 from flooring down
    let count = ((ratio * n as f64) + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, count.min(n)).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn sample_records(
    records: &[CanonicalRecord],
    ratio: f64,
    rng_seed: u64,
) -> Result<Vec<CanonicalRecord>, HarnessError> {
    Ok(sample_indices(records.len(), ratio, rng_seed)?
        .into_iter()
        .map(|i| records[i].clone())
        .collect())
}

pub fn sample_seed(records: &[CanonicalRecord], ratio: f64, rng_seed: u64) -> Result<SeedSet, HarnessError> {
    seed_set(&sample_records(records, ratio, rng_seed)?)
}

pub fn seed_set(records: &[CanonicalRecord]) -> Result<SeedSet, HarnessError> {
    let seeds = records
        .iter()
        .map(CanonicalRecord::to_seed)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SeedSet::new(seeds)?)
}

/// 1 when both forms parse to the same canonical text, or, when either does
/// not parse, when their whitespace-collapsed strings agree.
pub fn exact_match(predicted: &str, gold: &str, language: Language) -> u8 {
    let same = match (
        FormalProgram::parse(language, predicted),
        FormalProgram::parse(language, gold),
    ) {
        (Ok(p), Ok(g)) => p.canonical() == g.canonical(),
        _ => normalize_ws(predicted) == normalize_ws(gold),
    };
    u8::from(same)
}

/// Executes `program` and compares its answer with `gold`; execution
/// errors score 0 and are returned as the flag.
pub fn answer_accuracy(program: &KoplProgram, gold: &str, kb: &ToyKB) -> (u8, Option<String>) {
    match execute(program, kb) {
        Ok(answer) => (u8::from(answer.matches_text(gold)), None),
        Err(e) => (0, Some(format!("execution: {e}"))),
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub prompt_hash: String,
    pub demo_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtype: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub demos: usize,
    pub linking: bool,
    pub run: usize,
    /// `None` when the cell could not be run.
    pub exact_match: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub task: Task,
    pub language: Language,
    pub backend: String,
    pub k: usize,
    pub entity_linking: bool,
    pub rng_seed: u64,
    pub rows: Vec<ReportRow>,
    /// Mean of each row metric over all rows.
    pub aggregates: BTreeMap<String, f64>,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepCell>,
}

impl ExperimentReport {
    pub fn empty(config: &RunConfig, backend: impl Into<String>) -> ExperimentReport {
        ExperimentReport {
            task: config.task,
            language: config.language,
            backend: backend.into(),
            k: config.k,
            entity_linking: config.entity_linking,
            rng_seed: config.rng_seed,
            rows: Vec::new(),
            aggregates: BTreeMap::new(),
            failures: 0,
            sweep: Vec::new(),
        }
    }

    fn finish(mut self, config: &RunConfig) -> ExperimentReport {
        self.aggregates = aggregate(&self.rows);
        self.failures = self
            .rows
            .iter()
            .filter(|r| r.flags.iter().any(|f| f.starts_with("backend")))
            .count();
        if let Some(ratio) = config.parser_accuracy.and_then(|p| p.ratio()) {
            self.aggregates.insert("parser_accuracy_ratio".into(), ratio);
        }
        self
    }
}

/// Per-metric means; rows missing a metric count as 0.
pub fn aggregate(rows: &[ReportRow]) -> BTreeMap<String, f64> {
    let keys: BTreeSet<&String> = rows.iter().flat_map(|r| r.metrics.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let sum: f64 = rows.iter().map(|r| r.metrics.get(k).copied().unwrap_or(0.0)).sum();
            (k.clone(), sum / rows.len() as f64)
        })
        .collect()
}

/// The expected completion of each target: its question for understanding,
/// its generation-side logical form for generation.
pub fn gold_outputs(task: Task, targets: &[CanonicalRecord]) -> BTreeMap<String, String> {
    targets
        .iter()
        .map(|t| {
            let gold = match task {
                Task::Generation => t.generation_text(),
                _ => t.question.clone(),
            };
            (t.id.clone(), gold)
        })
        .collect()
}

/// Gateway for `config.backend`. `run` shifts the seed of corrupting mocks
/// so repeated runs differ.
pub fn build_gateway(config: &RunConfig, gold: BTreeMap<String, String>, run: usize) -> Result<Gateway, HarnessError> {
    let backend: Arc<dyn crate::llm::CompletionBackend> = if let Some(spec) = config.backend.strip_prefix("mock:") {
        let mode = match MockMode::parse(spec)? {
            MockMode::Corrupt { rate, seed } => MockMode::Corrupt {
                rate,
                seed: seed.wrapping_add(run as u64),
            },
            m => m,
        };
        Arc::new(MockBackend::new(mode).with_gold(gold))
    } else if config.backend == "remote" {
        let remote = config
            .remote
            .clone()
            .ok_or_else(|| HarnessError::Config("backend \"remote\" needs a remote section".into()))?;
        Arc::new(RemoteBackend::new(remote)?)
    } else {
        return Err(HarnessError::Config(format!("unknown backend {:?}", config.backend)));
    };
    Ok(Gateway::new(backend, config.max_in_flight)?)
}

/// Inputs shared by both tasks.
pub struct RunContext<'a> {
    pub config: &'a RunConfig,
    pub seeds: &'a SeedSet,
    pub targets: &'a [CanonicalRecord],
    pub kb: Option<&'a ToyKB>,
    pub vocab: Option<&'a NameIndex>,
    pub templates: &'a PromptTemplates,
}

/// Continuation up to the stop marker, trimmed.
fn clean_output(text: &str) -> String {
    text.split("[SEP]").next().unwrap_or("").trim().to_string()
}

fn check_length(config: &RunConfig, id: &str, prompt: &str) -> Result<(), HarnessError> {
    match config.max_prompt_chars {
        Some(limit) if prompt.chars().count() > limit => Err(HarnessError::PromptTooLong {
            id: id.to_string(),
            chars: prompt.chars().count(),
            limit,
        }),
        _ => Ok(()),
    }
}

fn demo_options(target: &CanonicalRecord) -> SelectOptions {
    SelectOptions {
        exclude_id: Some(target.id.clone()),
        ..SelectOptions::default()
    }
}

/// A pseudo-dataset row: the model's question for one target logical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoRow {
    pub id: String,
    pub question: Option<String>,
    pub failure: Option<String>,
}

/// Understanding task: verbalize each target logical form.
pub fn run_understanding(
    ctx: &RunContext<'_>,
    gateway: &Gateway,
) -> Result<(Vec<PseudoRow>, ExperimentReport), HarnessError> {
    let config = ctx.config;
    let index = if config.k > 0 && config.task == Task::Understanding {
        Some(build_skeleton_index(ctx.seeds)?)
    } else {
        None
    };
    let mut requests = Vec::with_capacity(ctx.targets.len());
    let mut demo_ids = Vec::with_capacity(ctx.targets.len());
    for target in ctx.targets {
        let program = target.program()?;
        let (prompt, ids) = match &index {
            _ if config.task == Task::ZeroShotUnderstanding => (
                build_zero_shot_prompt(&program.understanding_text(), config.language)?,
                Vec::new(),
            ),
            Some(index) => {
                let demos = select_lf_demos(&program, ctx.seeds, index, config.k, &demo_options(target))?;
                let pairs: Vec<(String, String)> = demos
                    .iter()
                    .map(|d| (d.program.understanding_text(), d.question.clone()))
                    .collect();
                (
                    ctx.templates
                        .understanding(&program.understanding_text(), &pairs, config.language),
                    ids_of(&demos),
                )
            }
            None => (
                ctx.templates
                    .understanding(&program.understanding_text(), &[], config.language),
                Vec::new(),
            ),
        };
        check_length(config, &target.id, &prompt.text)?;
        requests.push(CompletionRequest::new(target.id.clone(), prompt.text));
        demo_ids.push(ids);
    }
    let responses = gateway.complete_all(&requests);
    let mut report = ExperimentReport::empty(config, gateway.backend_id());
    let mut pseudo = Vec::with_capacity(ctx.targets.len());
    for (((target, request), ids), response) in ctx.targets.iter().zip(&requests).zip(demo_ids).zip(responses) {
        let mut row = ReportRow {
            id: target.id.clone(),
            prompt_hash: prompt_hash(&request.prompt),
            demo_ids: ids,
            qtype: target.qtype.clone(),
            ..ReportRow::default()
        };
        match response {
            Ok(resp) => {
                let question = clean_output(&resp.text);
                let hit = normalize_ws(&question) == normalize_ws(&target.question);
                row.metrics.insert("question_match".into(), f64::from(u8::from(hit)));
                row.raw_output = Some(resp.text);
                row.output = Some(question.clone());
                pseudo.push(PseudoRow {
                    id: target.id.clone(),
                    question: Some(question),
                    failure: None,
                });
            }
            Err(e) => {
                row.metrics.insert("question_match".into(), 0.0);
                row.flags.push(format!("backend: {e}"));
                pseudo.push(PseudoRow {
                    id: target.id.clone(),
                    question: None,
                    failure: Some(e.to_string()),
                });
            }
        }
        report.rows.push(row);
    }
    Ok((pseudo, report.finish(config)))
}

fn ids_of(demos: &[&SeedExample]) -> Vec<String> {
    demos.iter().map(|d| d.id.clone()).collect()
}

/// Names within `config.kb_radius` hops of the target's entities.
fn kb_names(ctx: &RunContext<'_>, target: &CanonicalRecord) -> Vec<String> {
    let Some(kb) = ctx.kb else {
        return Vec::new();
    };
    let mut names = BTreeSet::new();
    for m in &target.entities {
        let ids: Vec<String> = match &m.kb_id {
            Some(id) => vec![id.clone()],
            None => kb
                .entities_named(&m.name)
                .iter()
                .map(|&e| kb.entities[e].id.clone())
                .collect(),
        };
        for id in ids {
            if let Ok(found) = hop_context(kb, &id, ctx.config.kb_radius) {
                names.extend(found);
            }
        }
    }
    names.into_iter().collect()
}

/// Generation task: parse each target question into a logical form.
pub fn run_generation(ctx: &RunContext<'_>, gateway: &Gateway) -> Result<ExperimentReport, HarnessError> {
    let config = ctx.config;
    let index = if config.k > 0 {
        Some(build_bm25_index(ctx.seeds)?)
    } else {
        None
    };
    let mut requests = Vec::with_capacity(ctx.targets.len());
    let mut demo_ids = Vec::with_capacity(ctx.targets.len());
    for target in ctx.targets {
        let spans = target.spans();
        let demos = match &index {
            Some(index) => select_nlq_demos(
                &target.question,
                &spans,
                ctx.seeds,
                index,
                config.k,
                &demo_options(target),
            )?,
            None => Vec::new(),
        };
        let pairs: Vec<(String, String)> = demos
            .iter()
            .map(|d| (d.question.clone(), d.program.generation_text()))
            .collect();
        let question = if config.mask_target_question {
            mask_nlq(&target.question, &spans).text
        } else {
            target.question.clone()
        };
        let block = if config.entity_linking {
            ctx.templates.kb_block(&kb_names(ctx, target))
        } else {
            String::new()
        };
        let prompt = ctx.templates.generation(&question, &pairs, config.language, &block);
        check_length(config, &target.id, &prompt.text)?;
        requests.push(CompletionRequest::new(target.id.clone(), prompt.text));
        demo_ids.push(ids_of(&demos));
    }
    let responses = gateway.complete_all(&requests);
    let mut report = ExperimentReport::empty(config, gateway.backend_id());
    for (((target, request), ids), response) in ctx.targets.iter().zip(&requests).zip(demo_ids).zip(responses) {
        let mut row = ReportRow {
            id: target.id.clone(),
            prompt_hash: prompt_hash(&request.prompt),
            demo_ids: ids,
            qtype: target.qtype.clone(),
            ..ReportRow::default()
        };
        let score_answers = config.language == Language::Kopl && ctx.kb.is_some() && target.answer.is_some();
        match response {
            Ok(resp) => {
                let mut output = clean_output(&resp.text);
                let parsed = FormalProgram::parse(config.language, &output);
                let parsed = match parsed {
                    Ok(p) if config.entity_linking && ctx.vocab.is_some() => {
                        let (linked, links) = link_program(&p, ctx.vocab.expect("checked"));
                        if !links.replaced.is_empty() {
                            output = linked.canonical();
                            row.flags.push(format!("linked: {}", links.replaced.len()));
                        }
                        for name in links.unlinked {
                            row.flags.push(format!("unlinked: {name}"));
                        }
                        Ok(linked)
                    }
                    other => other,
                };
                if let Err(e) = &parsed {
                    row.flags.push(format!("parse: {e}"));
                }
                let em = exact_match(&output, &target.lf.text, config.language);
                row.metrics.insert("exact_match".into(), f64::from(em));
                if score_answers {
                    let (acc, flag) = match parsed.as_ref().ok().and_then(FormalProgram::as_kopl) {
                        Some(p) => {
                            answer_accuracy(p, target.answer.as_deref().expect("checked"), ctx.kb.expect("checked"))
                        }
                        None => (0, None),
                    };
                    row.metrics.insert("answer_accuracy".into(), f64::from(acc));
                    row.flags.extend(flag);
                }
                row.raw_output = Some(resp.text);
                row.output = Some(output);
            }
            Err(e) => {
                row.metrics.insert("exact_match".into(), 0.0);
                if score_answers {
                    row.metrics.insert("answer_accuracy".into(), 0.0);
                }
                row.flags.push(format!("backend: {e}"));
            }
        }
        report.rows.push(row);
    }
    Ok(report.finish(config))
}

/// Generation sweep over demo counts, linking on/off and repeated runs, all
/// on one seed sample. Cells whose prompts exceed `max_prompt_chars` stay
/// empty.
pub fn run_sweep(ctx: &RunContext<'_>, grid: &SweepGrid) -> Result<ExperimentReport, HarnessError> {
    let gold = gold_outputs(Task::Generation, ctx.targets);
    let mut linking = grid.linking.clone();
    linking.sort_unstable();
    linking.dedup();
    let mut cells = Vec::new();
    let mut backend = String::new();
    for &demos in &grid.demo_counts {
        for &link in &linking {
            for run in 0..grid.runs {
                let config = RunConfig {
                    task: Task::Generation,
                    k: demos,
                    entity_linking: link,
                    ..ctx.config.clone()
                };
                let gateway = build_gateway(&config, gold.clone(), run)?;
                backend = gateway.backend_id();
                let cell_ctx = RunContext {
                    config: &config,
                    ..*ctx
                };
                let exact_match = match run_generation(&cell_ctx, &gateway) {
                    Ok(r) => Some(r.aggregates.get("exact_match").copied().unwrap_or(0.0)),
                    Err(HarnessError::PromptTooLong { .. }) => None,
                    Err(e) => return Err(e),
                };
                cells.push(SweepCell {
                    demos,
                    linking: link,
                    run,
                    exact_match,
                });
            }
        }
    }
    let mut report = ExperimentReport::empty(ctx.config, backend);
    report.task = Task::Generation;
    report.sweep = cells;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_sample_sizes() {
        assert_eq!(sample_indices(20000, 0.01, 1).unwrap().len(), 200);
        assert_eq!(sample_indices(7, 1.0, 1).unwrap(), (0..7).collect::<Vec<_>>());
        assert_eq!(sample_indices(10, 0.29, 1).unwrap().len(), 2);
        assert_eq!(
            sample_indices(100, 0.5, 9).unwrap(),
            sample_indices(100, 0.5, 9).unwrap()
        );
        assert_ne!(
            sample_indices(100, 0.5, 9).unwrap(),
            sample_indices(100, 0.5, 10).unwrap()
        );
        assert!(matches!(sample_indices(10, 0.0, 1), Err(HarnessError::Ratio(_))));
        assert!(matches!(sample_indices(10, 1.5, 1), Err(HarnessError::Ratio(_))));
    }

    #[test]
    fn exact_match_normalizes() {
        let g = "Find(A).Relate(r, forward).What()";
        assert_eq!(exact_match(g, g, Language::Kopl), 1);
        assert_eq!(exact_match("Find(A).Relate(r,  forward).What()", g, Language::Kopl), 1);
        assert_eq!(
            exact_match(
                "Find [arg] A [func] Relate [arg] r [arg] forward [func] What",
                g,
                Language::Kopl
            ),
            1
        );
        assert_eq!(exact_match("Find(A).Relate(s, forward).What()", g, Language::Kopl), 0);
        assert_eq!(exact_match("garbage (", "garbage  (", Language::Kopl), 1);
    }

    #[test]
    fn aggregate_is_mean() {
        let row = |v: f64| ReportRow {
            metrics: BTreeMap::from([("m".to_string(), v)]),
            ..ReportRow::default()
        };
        let a = aggregate(&[row(1.0), row(0.0), row(0.5), ReportRow::default()]);
        assert_eq!(a["m"], 0.375);
        assert!(aggregate(&[]).is_empty());
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(Task::Generation, Language::Kopl);
        c.validate().unwrap();
        c.seed_ratio = 0.0;
        assert!(c.validate().is_err());
        let c = RunConfig::new(Task::ZeroShotUnderstanding, Language::Sparql);
        assert!(c.validate().is_err());
        let parsed: RunConfig = serde_json::from_str(r#"{"task":"generation","language":"kopl"}"#).unwrap();
        assert_eq!(parsed, RunConfig::new(Task::Generation, Language::Kopl));
    }
}
