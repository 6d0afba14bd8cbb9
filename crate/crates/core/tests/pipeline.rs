//! Ingestion and harness runs over the bundled dataset fixtures.

mod common;

use common::{fixture, records, toy_kb};
use lfprobe::fl_ast::Language;
use lfprobe::harness::{
    build_gateway, emit_report, gold_outputs, ingest, native_row, run_generation, run_understanding, seed_set,
    DatasetKind, HarnessError, ReportFormat, RunConfig, RunContext,
};
use lfprobe::kb_link::{build_name_index, vocab_from_kb};
use lfprobe::prompt::{PromptTemplates, Task};

#[test]
fn grailqa_skips_the_broken_record() {
    let report = ingest(DatasetKind::Grailqa, &fixture("datasets/grailqa.json")).unwrap();
    assert_eq!(report.records.len(), 6);
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].index, 6);
    for r in &report.records {
        assert_eq!(r.lf.language, Language::Sparql);
        assert!(r.program().is_ok(), "{}", r.id);
    }
}

#[test]
fn overnight_rows_parse() {
    let rs = records(DatasetKind::Overnight, "datasets/overnight.jsonl");
    assert_eq!(rs.len(), 5);
    assert!(rs.iter().all(|r| r.program().is_ok()));
}

#[test]
fn kqa_rows_carry_answers_and_mentions() {
    let rs = records(DatasetKind::KqaPro, "datasets/kqa_pro_100.json");
    assert_eq!(rs.len(), 100);
    assert!(rs.iter().all(|r| r.answer.is_some()));
    assert!(rs.iter().any(|r| !r.entities.is_empty()));
}

fn understanding_identity(kind: DatasetKind, rel: &str) {
    let targets = records(kind, rel);
    let seeds = seed_set(&targets).unwrap();
    let templates = PromptTemplates::default();
    let mut config = RunConfig::new(Task::Understanding, kind.language());
    config.k = 2;
    let gateway = build_gateway(&config, gold_outputs(config.task, &targets), 0).unwrap();
    let ctx = RunContext {
        config: &config,
        seeds: &seeds,
        targets: &targets,
        kb: None,
        vocab: None,
        templates: &templates,
    };
    let (pseudo, report) = run_understanding(&ctx, &gateway).unwrap();
    assert_eq!(report.aggregates["question_match"], 1.0);
    // the target itself is never its own demonstration
    for row in &report.rows {
        assert!(!row.demo_ids.contains(&row.id));
        assert!(row.demo_ids.len() <= 2);
    }
    for (row, target) in pseudo.iter().zip(&targets) {
        let native = native_row(kind, target, row.question.as_deref(), None);
        assert!(native.get("failed").is_none());
    }
}

#[test]
fn understanding_identity_every_language() {
    understanding_identity(DatasetKind::KqaPro, "datasets/kqa_pro_10.json");
    understanding_identity(DatasetKind::Grailqa, "datasets/grailqa.json");
    understanding_identity(DatasetKind::Overnight, "datasets/overnight.jsonl");
}

#[test]
fn generation_identity_for_sparql_and_lambda_dcs() {
    for (kind, rel) in [
        (DatasetKind::Grailqa, "datasets/grailqa.json"),
        (DatasetKind::Overnight, "datasets/overnight.jsonl"),
    ] {
        let targets = records(kind, rel);
        let seeds = seed_set(&targets).unwrap();
        let templates = PromptTemplates::default();
        let config = RunConfig::new(Task::Generation, kind.language());
        let gateway = build_gateway(&config, gold_outputs(config.task, &targets), 0).unwrap();
        let ctx = RunContext {
            config: &config,
            seeds: &seeds,
            targets: &targets,
            kb: None,
            vocab: None,
            templates: &templates,
        };
        let report = run_generation(&ctx, &gateway).unwrap();
        assert_eq!(report.aggregates["exact_match"], 1.0, "{kind:?}");
    }
}

#[test]
fn zero_shot_prompts_carry_the_target() {
    let targets = records(DatasetKind::KqaPro, "datasets/kqa_pro_10.json");
    let seeds = seed_set(&targets).unwrap();
    let templates = PromptTemplates::default();
    let config = RunConfig::new(Task::ZeroShotUnderstanding, Language::Kopl);
    let gateway = build_gateway(&config, gold_outputs(config.task, &targets), 0).unwrap();
    let ctx = RunContext {
        config: &config,
        seeds: &seeds,
        targets: &targets,
        kb: None,
        vocab: None,
        templates: &templates,
    };
    let (_, report) = run_understanding(&ctx, &gateway).unwrap();
    assert_eq!(report.aggregates["question_match"], 1.0);
    assert!(report.rows.iter().all(|r| r.demo_ids.is_empty()));
}

#[test]
fn knowledge_block_and_linking_with_the_toy_kb() {
    let targets = records(DatasetKind::KqaPro, "datasets/kqa_pro_10.json");
    let seeds = seed_set(&records(DatasetKind::KqaPro, "datasets/kqa_pro_seed_50.json")).unwrap();
    let kb = toy_kb();
    let vocab = build_name_index(vocab_from_kb(&kb)).unwrap();
    let templates = PromptTemplates::default();
    let mut config = RunConfig::new(Task::Generation, Language::Kopl);
    config.entity_linking = true;
    let gateway = build_gateway(&config, gold_outputs(config.task, &targets), 0).unwrap();
    let ctx = RunContext {
        config: &config,
        seeds: &seeds,
        targets: &targets,
        kb: Some(&kb),
        vocab: Some(&vocab),
        templates: &templates,
    };
    let report = run_generation(&ctx, &gateway).unwrap();
    // gold programs use real KB names, so linking changes nothing
    assert_eq!(report.aggregates["exact_match"], 1.0);
    assert_eq!(report.aggregates["answer_accuracy"], 1.0);

    let mut plain = config.clone();
    plain.entity_linking = false;
    let plain_ctx = RunContext { config: &plain, ..ctx };
    let without = run_generation(&plain_ctx, &gateway).unwrap();
    let differs = report
        .rows
        .iter()
        .zip(&without.rows)
        .filter(|(a, b)| a.prompt_hash != b.prompt_hash)
        .count();
    assert!(differs > 0, "the knowledge block never reached a prompt");
}

#[test]
fn prompt_limit_is_enforced() {
    let targets = records(DatasetKind::KqaPro, "datasets/kqa_pro_10.json");
    let seeds = seed_set(&targets).unwrap();
    let templates = PromptTemplates::default();
    let mut config = RunConfig::new(Task::Generation, Language::Kopl);
    config.max_prompt_chars = Some(40);
    let gateway = build_gateway(&config, gold_outputs(config.task, &targets), 0).unwrap();
    let ctx = RunContext {
        config: &config,
        seeds: &seeds,
        targets: &targets,
        kb: None,
        vocab: None,
        templates: &templates,
    };
    assert!(matches!(
        run_generation(&ctx, &gateway),
        Err(HarnessError::PromptTooLong { limit: 40, .. })
    ));
}

#[test]
fn reports_are_written_in_both_formats() {
    let targets = records(DatasetKind::KqaPro, "datasets/kqa_pro_10.json");
    let seeds = seed_set(&targets).unwrap();
    let templates = PromptTemplates::default();
    let mut config = RunConfig::new(Task::Generation, Language::Kopl);
    config.backend = "mock:copy_demo".into();
    let gateway = build_gateway(&config, gold_outputs(config.task, &targets), 0).unwrap();
    let ctx = RunContext {
        config: &config,
        seeds: &seeds,
        targets: &targets,
        kb: None,
        vocab: None,
        templates: &templates,
    };
    let report = run_generation(&ctx, &gateway).unwrap();
    assert!(report.aggregates["exact_match"] < 1.0);
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_report(&report, dir.path(), "r", &[ReportFormat::Json, ReportFormat::Markdown]).unwrap();
    assert_eq!(paths.len(), 2);
    assert!(paths.iter().all(|p| p.exists()));
}
