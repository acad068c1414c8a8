mod common;

use std::fs;

use common::{fixture, hemeval};
use predicates::prelude::*;
use serde_json::Value;

fn data(name: &str) -> String {
    let p = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name);
    p.display().to_string()
}

#[test]
fn validate_bundled_defaults() {
    hemeval()
        .args(["validate", "--schema", &data("schema.json"), "--lexicon", &data("lexicon.json")])
        .assert()
        .code(0)
        .stdout(predicate::str::contains("ok:"));
    hemeval().arg("validate").assert().code(0);
}

#[test]
fn eval_without_inputs_is_usage_error() {
    hemeval()
        .args(["eval", "--out-dir", "x"])
        .assert()
        .code(2)
        .stderr(predicate::str::contains("Usage"));
}

#[test]
fn unknown_flag_is_usage_error() {
    hemeval().args(["extract", "--bogus"]).assert().code(2);
    hemeval().arg("frobnicate").assert().code(2);
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("lexicon.json");
    fs::write(&bad, "{\"attributes\": 3}").unwrap();
    hemeval().args(["validate", "--lexicon"]).arg(&bad).assert().code(2);

    hemeval()
        .args(["eval", "--pairs"])
        .arg(dir.path().join("missing.jsonl"))
        .args(["--out-dir"])
        .arg(dir.path())
        .assert()
        .code(2);

    hemeval()
        .env("HEMEVAL_THREADS", "zero")
        .arg("validate")
        .assert()
        .code(2)
        .stderr(predicate::str::contains("HEMEVAL_THREADS"));
}

#[test]
fn unknown_provider_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.jsonl");
    fs::write(&pairs, "{\"image_id\":\"a\",\"reference\":\"small cell\",\"candidate\":\"small cell\"}\n").unwrap();
    hemeval()
        .args(["eval", "--provider", "glove"])
        .arg("--pairs")
        .arg(&pairs)
        .arg("--out-dir")
        .arg(dir.path())
        .assert()
        .code(2)
        .stderr(predicate::str::contains("unknown provider"));
}

#[test]
fn eval_writes_meta_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs_in.jsonl");
    fs::write(
        &pairs,
        "{\"image_id\":\"a\",\"reference\":\"large blast cell\",\"candidate\":\"large blast cell\"}\n\
         {\"image_id\":\"b\",\"reference\":\"w x y z\",\"candidate\":\"p q r s\"}\n",
    )
    .unwrap();
    hemeval()
        .args(["eval", "--metrics", "bleu,rougeL", "--bleu-max-n", "2", "--smoothing", "none"])
        .arg("--pairs")
        .arg(&pairs)
        .arg("--out-dir")
        .arg(dir.path())
        .assert()
        .success();
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("eval.json")).unwrap()).unwrap();
    assert_eq!(v["internal"]["bleu"], 0.5);
    assert_eq!(v["internal"]["bertscore_f"], Value::Null);
    assert_eq!(v["meta"]["options"]["bleu_max_n"], 2);
    assert_eq!(v["meta"]["inputs"]["pairs"]["file"], "pairs_in.jsonl");
    assert_eq!(v["meta"]["inputs"]["pairs"]["sha256"].as_str().unwrap().len(), 64);
    let lines = fs::read_to_string(dir.path().join("pairs.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);
}

#[test]
fn synth_reports_rejects() {
    let dir = tempfile::tempdir().unwrap();
    hemeval()
        .args(["synth", "--variants", "2", "--records"])
        .arg(fixture("cells.csv"))
        .arg("--out-dir")
        .arg(dir.path())
        .assert()
        .success()
        .stdout(predicate::str::contains("7 records, 3 rejects, 14 captions, 0 unfaithful"));
    let rejects = fs::read_to_string(dir.path().join("rejects.jsonl")).unwrap();
    assert!(rejects.contains("\"reason\":\"duplicate id\""));
}

#[test]
fn attr_eval_rejects_unknown_extraction_ids() {
    let dir = tempfile::tempdir().unwrap();
    let extraction = dir.path().join("extraction.jsonl");
    fs::write(&extraction, "{\"image_id\":\"zzz\",\"values\":{}}\n").unwrap();
    hemeval()
        .args(["attr-eval", "--extraction"])
        .arg(&extraction)
        .arg("--truth")
        .arg(fixture("cells.csv"))
        .arg("--out-dir")
        .arg(dir.path())
        .assert()
        .code(2)
        .stderr(predicate::str::contains("zzz"));
}

#[test]
fn classify_singleton_class_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("e.jsonl");
    fs::write(
        &data,
        "{\"id\":\"a\",\"vector\":[1,0],\"labels\":{\"diagnosis\":\"AML\"}}\n\
         {\"id\":\"b\",\"vector\":[0,1],\"labels\":{\"diagnosis\":\"CLL\"}}\n\
         {\"id\":\"c\",\"vector\":[0,2],\"labels\":{\"diagnosis\":\"CLL\"}}\n",
    )
    .unwrap();
    hemeval()
        .args(["classify", "--label", "diagnosis", "--data"])
        .arg(&data)
        .arg("--out-dir")
        .arg(dir.path())
        .assert()
        .code(2)
        .stderr(predicate::str::contains("AML"));
}
