//! Fixture loading shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use lfprobe::harness::{ingest, CanonicalRecord, DatasetKind};
use lfprobe::kb_link::{build_name_index, load_vocab, NameIndex};
use lfprobe::kopl_engine::ToyKB;
use serde_json::Value;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn json(rel: &str) -> Value {
    let text = std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn records(kind: DatasetKind, rel: &str) -> Vec<CanonicalRecord> {
    let report = ingest(kind, &fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"));
    report.records
}

pub fn toy_kb() -> ToyKB {
    ToyKB::load(&fixture("kb/toy_kb.json")).expect("toy KB loads")
}

pub fn name_index(rel: &str) -> NameIndex {
    build_name_index(load_vocab(&fixture(rel)).expect("vocab loads")).expect("vocab indexes")
}

pub fn str_of<'a>(v: &'a Value, key: &str) -> &'a str {
    v[key].as_str().unwrap_or_else(|| panic!("missing string field {key}"))
}
