#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use assert_cmd::Command;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/pipeline")
}

pub fn hemeval() -> Command {
    Command::cargo_bin("hemeval").expect("binary builds")
}

/// Artifacts compared against the golden directory, relative to the run root.
pub const ARTIFACTS: [&str; 14] = [
    "synth/captions.jsonl",
    "synth/rejects.jsonl",
    "synth/synth.json",
    "extract/extraction.jsonl",
    "extract/extract.json",
    "eval/pairs.jsonl",
    "eval/pairs_external.jsonl",
    "eval/eval.json",
    "attr/attr.json",
    "attr/attr.md",
    "classify/classify.json",
    "classify/classify.md",
    "report/report.json",
    "report/report.md",
];

fn run(root: &Path, args: &[&str]) {
    let assert = hemeval().current_dir(root).args(args).assert();
    let out = assert.get_output();
    assert!(
        out.status.success(),
        "hemeval {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Runs synth → extract → eval → attr-eval → classify → report on the
/// fixtures inside `root` and returns the artifacts listed in [`ARTIFACTS`].
pub fn run_pipeline(root: &Path) -> Vec<(&'static str, Vec<u8>)> {
    let f = |n: &str| fixture(n).display().to_string();
    let seed = "7";
    run(root, &["synth", "--records", &f("cells.csv"), "--seed", seed, "--variants", "1", "--out-dir", "synth"]);
    run(root, &["synth", "--records", &f("external_cells.csv"), "--seed", seed, "--out-dir", "synth_ext"]);
    run(root, &["extract", "--captions", &f("candidates.jsonl"), "--out-dir", "extract"]);
    run(root, &["extract", "--captions", &f("external_candidates.jsonl"), "--out-dir", "extract_ext"]);
    run(
        root,
        &[
            "eval",
            "--references",
            "synth/captions.jsonl",
            "--candidates",
            &f("candidates.jsonl"),
            "--external-references",
            "synth_ext/captions.jsonl",
            "--external-candidates",
            &f("external_candidates.jsonl"),
            "--provider",
            "hashed:5",
            "--model",
            "fixture-model",
            "--out-dir",
            "eval",
        ],
    );
    run(
        root,
        &[
            "attr-eval",
            "--extraction",
            "extract/extraction.jsonl",
            "--truth",
            &f("cells.csv"),
            "--external-extraction",
            "extract_ext/extraction.jsonl",
            "--external-truth",
            &f("external_cells.csv"),
            "--model",
            "fixture-model",
            "--out-dir",
            "attr",
        ],
    );
    run(
        root,
        &[
            "classify",
            "--data",
            &f("embeddings.jsonl"),
            "--label",
            "diagnosis",
            "--label",
            "cell_type",
            "--external-test",
            &f("external_embeddings.jsonl"),
            "--seed",
            "3",
            "--backbone",
            "fixture-backbone",
            "--out-dir",
            "classify",
        ],
    );
    run(
        root,
        &[
            "report",
            "--eval",
            "eval/eval.json",
            "--attr",
            "attr/attr.json",
            "--classify",
            "classify/classify.json",
            "--out-dir",
            "report",
        ],
    );
    ARTIFACTS
        .iter()
        .map(|name| (*name, fs::read(root.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))))
        .collect()
}

/// Writes the artifacts to the golden directory when `HEMEVAL_BLESS` is set.
pub fn bless(artifacts: &[(&str, Vec<u8>)]) -> bool {
    if std::env::var_os("HEMEVAL_BLESS").is_none() {
        return false;
    }
    for (name, bytes) in artifacts {
        let path = golden_dir().join(name);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, bytes).unwrap();
    }
    true
}

/// Names of artifacts that differ from the golden copies.
pub fn golden_mismatches(artifacts: &[(&str, Vec<u8>)]) -> Vec<String> {
    artifacts
        .iter()
        .filter(|(name, bytes)| fs::read(golden_dir().join(name)).ok().as_ref() != Some(bytes))
        .map(|(name, _)| name.to_string())
        .collect()
}
