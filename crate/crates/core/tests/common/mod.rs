#![allow(dead_code)]

pub mod invariants;
pub mod oracle;

use std::path::PathBuf;

use convsearch_core::index::read_jsonl_file;
use convsearch_core::pipeline::load_topics;
use convsearch_core::{build_index, InvertedIndex, Qrels, Topic};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn golden(name: &str) -> PathBuf {
    fixture("golden").join(name)
}

pub fn golden_json(name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(golden(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn golden_text(name: &str) -> String {
    std::fs::read_to_string(golden(name)).unwrap()
}

pub fn index_of(name: &str) -> InvertedIndex {
    build_index(read_jsonl_file(fixture(name)).unwrap()).unwrap()
}

pub fn corpus50() -> InvertedIndex {
    index_of("corpus50.jsonl")
}

pub fn topics(name: &str) -> Vec<Topic> {
    load_topics(fixture(name)).unwrap()
}

pub fn train_qrels() -> Qrels {
    Qrels::load(fixture("train_qrels.txt")).unwrap()
}

/// Decodes a golden number, where infinities are written as strings.
pub fn real(v: &serde_json::Value) -> f64 {
    match v {
        serde_json::Value::String(s) if s == "inf" => f64::INFINITY,
        serde_json::Value::String(s) if s == "-inf" => f64::NEG_INFINITY,
        v => v.as_f64().unwrap(),
    }
}

pub fn assert_close(actual: f64, expected: f64, what: &str) {
    let tol = 1e-9 * expected.abs().max(1.0);
    assert!((actual - expected).abs() <= tol, "{what}: {actual} vs {expected}");
}
