use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_nuggetindex"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }

    /// Runs with the fixture schema and the workspace store.
    fn governed(&self, args: &[&str]) -> Output {
        let schema = fixture("schema.json");
        let store = self.path("facts.store");
        let mut all: Vec<&str> = args.to_vec();
        all.extend(["--schema", schema.to_str().unwrap(), "--store", store.to_str().unwrap()]);
        self.run(&all)
    }

    fn ingest(&self, docs: &str) -> Value {
        let docs = fixture(docs);
        let out = self.governed(&["ingest", "--docs", docs.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    }

    /// Query output: the JSON result, then the context block.
    fn query(&self, args: &[&str]) -> (Value, String) {
        let mut all = vec!["query"];
        all.extend(args);
        let out = self.governed(&all);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8(out.stdout).unwrap();
        let mut stream = serde_json::Deserializer::from_str(&stdout).into_iter::<Value>();
        let result = stream.next().unwrap().unwrap();
        let context = stdout[stream.byte_offset()..].trim().to_string();
        (result, context)
    }
}

fn counts(summary: &Value) -> [u64; 7] {
    ["documents", "candidates", "inserted", "merged", "deprecated", "contested", "quarantined"].map(|k| summary[k].as_u64().unwrap_or_else(|| panic!("missing {k}: {summary}")))
}

#[test]
fn empty_ingest_reports_zeros() {
    let ws = Workspace::new();
    assert_eq!(counts(&ws.ingest("empty.jsonl")), [0; 7]);
}

#[test]
fn succession_ingest_and_query() {
    let ws = Workspace::new();
    assert_eq!(counts(&ws.ingest("succession.jsonl")), [3, 3, 2, 1, 0, 2, 0]);

    let (result, context) = ws.query(&["--text", "Alice Ng CEO", "--at", "2023-01-01"]);
    let hits = result["results"].as_array().unwrap();
    assert_eq!(hits.len(), 1);
    assert!(context.starts_with("Established facts:"), "{context}");
    assert!(context.contains("Globex") && !context.contains("Acme"), "{context}");

    let (result, context) = ws.query(&["--text", "Alice Ng CEO", "--at", "2020-01-01"]);
    assert_eq!(result["results"].as_array().unwrap().len(), 1);
    assert!(context.contains("Acme") && !context.contains("Globex"), "{context}");

    let (result, context) = ws.query(&["--text", "Alice Ng CEO", "--at", "2018-01-01"]);
    assert!(result["results"].as_array().unwrap().is_empty());
    assert!(context.is_empty(), "{context}");
}

#[test]
fn k_bounds_the_result() {
    let ws = Workspace::new();
    ws.ingest("contested.jsonl");
    let (result, _) = ws.query(&["--text", "Alice Ng CEO", "--at", "2021-01-01", "--view", "active_plus_contested", "--k", "1"]);
    assert_eq!(result["results"].as_array().unwrap().len(), 1);
}

#[test]
fn views_on_a_contested_store() {
    let ws = Workspace::new();
    let summary = ws.ingest("contested.jsonl");
    assert_eq!(summary["contested"], 2);

    let (result, context) = ws.query(&["--text", "Alice Ng CEO", "--at", "2021-01-01", "--view", "active"]);
    assert!(result["results"].as_array().unwrap().is_empty());
    assert!(context.is_empty());

    let (result, context) = ws.query(&["--text", "Alice Ng CEO", "--at", "2021-01-01", "--view", "active_plus_contested"]);
    assert_eq!(result["results"].as_array().unwrap().len(), 2);
    assert!(context.contains("Disputed (sources disagree):"), "{context}");
    // the header always appears; nothing is established here
    let established = context.split("Disputed").next().unwrap();
    assert_eq!(established.trim(), "Established facts:", "{context}");
}

#[test]
fn bad_at_exits_2() {
    let ws = Workspace::new();
    ws.ingest("succession.jsonl");
    for at in ["yesterday", "2023-13-01", ""] {
        let out = ws.governed(&["query", "--text", "CEO", "--at", at]);
        assert_eq!(out.status.code(), Some(2), "--at {at:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = ws.governed(&["query", "--text", "CEO", "--at", "2023-01-01", "--view", "everything"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_input_exits_2() {
    let ws = Workspace::new();
    let missing = ws.path("missing.jsonl");
    let out = ws.governed(&["ingest", "--docs", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let garbage = ws.path("garbage.jsonl");
    std::fs::write(&garbage, "{\"doc_id\": \"a\", \"timestamp\": \n").unwrap();
    let out = ws.governed(&["ingest", "--docs", garbage.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!ws.path("facts.store").exists() || counts_after(&ws) == 0);
}

fn counts_after(ws: &Workspace) -> u64 {
    let out = ws.governed(&["export"]);
    String::from_utf8(out.stdout).unwrap().lines().count() as u64
}

#[test]
fn missing_schema_exits_3() {
    let ws = Workspace::new();
    let docs = fixture("succession.jsonl");
    let store = ws.path("facts.store");
    let out = ws.run(&["ingest", "--docs", docs.to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    // nothing to integrate means nothing to refuse
    let empty = fixture("empty.jsonl");
    let out = ws.run(&["ingest", "--docs", empty.to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn discover_schema_needs_no_store() {
    let ws = Workspace::new();
    let docs = fixture("succession.jsonl");
    for args in [
        vec!["discover-schema", "--docs", docs.to_str().unwrap(), "--min-support", "1"],
        vec!["ingest", "--docs", docs.to_str().unwrap(), "--discover-schema", "--min-support", "1"],
    ] {
        let out = ws.run(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let draft: Value = serde_json::from_slice(&out.stdout).unwrap();
        let entries = draft.as_array().unwrap();
        assert!(!entries.is_empty());
        assert!(entries.iter().all(|e| e["canonical_name"].is_string() && e["cardinality"].is_string()));
    }
    assert!(!ws.path("nuggetindex.store").exists());
}

#[test]
fn export_round_trips_records() {
    let ws = Workspace::new();
    ws.ingest("succession.jsonl");
    let out_path = ws.path("records.jsonl");
    let out = ws.governed(&["export", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    let mut values: Vec<&str> = records.iter().map(|r| r["fact"]["object_norm"].as_str().unwrap()).collect();
    values.sort();
    assert_eq!(values, ["acme", "globex"]);
    assert_eq!(counts_after(&ws), 2);
}
