//! Provenance metadata and deterministic artifact writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub file: String,
    pub sha256: String,
}

/// Embedded in every JSON artifact. Contains no timestamps or absolute
/// paths so reruns are byte-identical.
#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub options: Value,
    /// Keyed by input role (`records`, `schema`, ...).
    pub inputs: BTreeMap<String, InputDigest>,
}

pub const BUNDLED: &str = "<bundled>";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Meta {
    pub fn new(command: &'static str, seed: Option<u64>, options: Value) -> Self {
        Meta {
            tool: "hemeval",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            options,
            inputs: BTreeMap::new(),
        }
    }

    /// Records the digest of an input file under its basename.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let file = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.inputs.insert(role.to_string(), InputDigest { file, sha256: sha256_hex(&bytes) });
        Ok(())
    }

    /// Records an optional file, or the digest of the bundled default text.
    pub fn input_or_bundled(&mut self, role: &str, path: Option<&Path>, bundled: &str) -> Result<()> {
        match path {
            Some(p) => self.input(role, p),
            None => {
                let digest = InputDigest { file: BUNDLED.to_string(), sha256: sha256_hex(bundled.as_bytes()) };
                self.inputs.insert(role.to_string(), digest);
                Ok(())
            }
        }
    }
}

/// Serializes `body` with an added `meta` field. Object keys are sorted.
pub fn with_meta<T: Serialize>(meta: &Meta, body: &T) -> Result<Value> {
    let mut map = serde_json::Map::new();
    map.insert("meta".into(), serde_json::to_value(meta)?);
    match serde_json::to_value(body)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("data".into(), other);
        }
    }
    Ok(Value::Object(map))
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(OutDir(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn write_jsonl<T: Serialize>(&self, name: &str, items: &[T]) -> Result<PathBuf> {
        let mut text = String::new();
        for item in items {
            text.push_str(&serde_json::to_string(item)?);
            text.push('\n');
        }
        self.write(name, &text)
    }
}
