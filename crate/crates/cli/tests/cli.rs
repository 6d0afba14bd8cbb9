//! Golden tests: each verb's stdout equals the library call it wraps.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lfprobe::fl_ast::{FormalProgram, Language};
use lfprobe::harness::{render_markdown, ExperimentReport};
use lfprobe::kopl_engine::{execute, ToyKB};
use lfprobe::skeleton::skeleton_of;
use serde_json::Value;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn lfprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 stdout")
}

fn sk1_program(dir: &Path) -> (PathBuf, String) {
    let fx: Value = serde_json::from_str(&std::fs::read_to_string(fixture("prompts/sk1.json")).unwrap()).unwrap();
    let program = fx["target_program"].as_str().unwrap().to_string();
    let path = dir.join("program.txt");
    std::fs::write(&path, &program).unwrap();
    (path, program)
}

#[test]
fn skeleton_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (path, program) = sk1_program(dir.path());
    let o = lfprobe(&["skeleton", "--language", "kopl", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let want = skeleton_of(&FormalProgram::parse(Language::Kopl, &program).unwrap())
        .unwrap()
        .text;
    assert_eq!(stdout(&o).trim_end(), want);
    assert!(want.starts_with("FindAll.FilterStr.FilterConcept.FindAll"));
    assert!(o.stderr.is_empty());
}

#[test]
fn skeleton_masks_questions() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.txt");
    std::fs::write(&q, "Which cost less? Batman Begins released in Italy or Tootsie").unwrap();
    let o = lfprobe(&[
        "skeleton",
        "--input",
        q.to_str().unwrap(),
        "--mention",
        "Batman Begins",
        "--mention",
        "Italy",
        "--mention",
        "Tootsie",
    ]);
    assert_eq!(stdout(&o).trim_end(), "Which cost less? [E0] released in [E1] or [E2]");
}

#[test]
fn parse_prints_serializations() {
    let dir = tempfile::tempdir().unwrap();
    let (path, program) = sk1_program(dir.path());
    let o = lfprobe(&["parse", "--language", "kopl", "--input", path.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = FormalProgram::parse(Language::Kopl, &program).unwrap();
    assert_eq!(v["canonical"], p.canonical());
    assert_eq!(v["understanding"], p.understanding_text());
    assert_eq!(v["generation"], p.generation_text());
}

#[test]
fn execute_matches_engine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.txt");
    let program = "FindAll().FilterConcept(city).Count()";
    std::fs::write(&path, program).unwrap();
    let kb_path = fixture("kb/toy_kb.json");
    let o = lfprobe(&[
        "execute",
        "--kb",
        kb_path.to_str().unwrap(),
        "--input",
        path.to_str().unwrap(),
    ]);
    let kb = ToyKB::load(&kb_path).unwrap();
    let p = FormalProgram::parse(Language::Kopl, program).unwrap();
    let want = execute(p.as_kopl().unwrap(), &kb).unwrap().to_text();
    assert_eq!(stdout(&o).trim_end(), want);
}

#[test]
fn run_with_echo_gold_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    let cfg = serde_json::json!({
        "task": "understanding",
        "language": "kopl",
        "k": 2,
        "targets": fixture("datasets/kqa_pro_10.json"),
        "seeds": fixture("datasets/kqa_pro_seed_50.json"),
    });
    std::fs::write(&config, cfg.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = lfprobe(&[
        "run",
        "--task",
        "generation",
        "--backend",
        "mock:echo_gold",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: ExperimentReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    // the flag wins over the config file
    assert_eq!(report.task.as_str(), "generation");
    assert_eq!(report.k, 2);
    assert_eq!(report.rows.len(), 10);
    assert_eq!(report.aggregates["exact_match"], 1.0);
    assert_eq!(
        std::fs::read_to_string(out.join("report.md")).unwrap(),
        render_markdown(&report)
    );

    let again = lfprobe(&["report", "--input", out.join("report.json").to_str().unwrap()]);
    assert_eq!(stdout(&again), render_markdown(&report));
}

#[test]
fn understanding_run_writes_pseudo_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = lfprobe(&[
        "run",
        "--task",
        "understanding",
        "--targets",
        fixture("datasets/kqa_pro_10.json").to_str().unwrap(),
        "--seeds",
        fixture("datasets/kqa_pro_seed_50.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = std::fs::read_to_string(out.join("pseudo.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 10);
    let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert!(first["question"].is_string() && first["program"].is_array());
}

#[test]
fn link_single_name() {
    let dir = tempfile::tempdir().unwrap();
    let name = dir.path().join("n.txt");
    std::fs::write(&name, "business.business_operation.industry").unwrap();
    let o = lfprobe(&[
        "link",
        "--vocab",
        fixture("link/relations_30.jsonl").to_str().unwrap(),
        "--kind",
        "relation",
        "--top",
        "1",
        "--input",
        name.to_str().unwrap(),
    ]);
    let hits: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(hits[0]["id"], "business.business_operation.industry");
    assert_eq!(hits[0]["exact"], true);
}

#[test]
fn unknown_verb_is_usage_error() {
    let o = lfprobe(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_required_option_is_usage_error() {
    let o = lfprobe(&["execute", "--input", "-"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.txt");
    std::fs::write(&path, "NotAFunction()").unwrap();
    let o = lfprobe(&["parse", "--language", "kopl", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn unreachable_backend_exits_three() {
    // bind then drop, so the port is very likely closed
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    let cfg = serde_json::json!({
        "task": "generation",
        "language": "kopl",
        "backend": "remote",
        "remote": {"endpoint": format!("http://127.0.0.1:{port}/generate"), "max_retries": 0, "timeout_ms": 2000},
    });
    std::fs::write(&config, cfg.to_string()).unwrap();
    let o = lfprobe(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--targets",
        fixture("datasets/kqa_pro_10.json").to_str().unwrap(),
        "--seeds",
        fixture("datasets/kqa_pro_seed_50.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
