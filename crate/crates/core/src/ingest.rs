//! Loaders for attribute tables (CSV), caption files and embeddings (JSONL).

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::types::{
    collapse_whitespace, AttributeRecord, AttributeSchema, CaptionPair, EmbeddingSet,
    ExtractionLine, ExtractionResult, Source,
};

/// A dropped row of an attribute table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub image_id: Option<String>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AttributeTable {
    pub records: Vec<AttributeRecord>,
    pub rejects: Vec<Reject>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_attribute_table(path: impl AsRef<Path>, schema: &AttributeSchema) -> Result<AttributeTable> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_attribute_table(&text, schema).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path, message),
        other => other,
    })
}

/// Parses an attribute table, keeping rows where every applicable attribute
/// has a valid value. Empty cells count as missing. A repeated `image_id`
/// rejects the later row.
pub fn parse_attribute_table(text: &str, schema: &AttributeSchema) -> Result<AttributeTable> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::parse("<csv>", e.to_string()))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = column("image_id")?;
    let source_col = column("source")?;
    let attr_cols = schema
        .attributes
        .iter()
        .map(|a| column(&a.name))
        .collect::<Result<Vec<_>>>()?;

    let mut table = AttributeTable::default();
    let mut seen = HashSet::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::parse("<csv>", format!("row {row_no}: {e}")))?;
        let id = row.get(id_col).map(str::trim).unwrap_or("");
        let reject = |reason: String| Reject {
            row: row_no,
            image_id: (!id.is_empty()).then(|| id.to_string()),
            reason,
        };
        if row.len() != header.len() {
            table.rejects.push(reject(format!(
                "expected {} fields, found {}",
                header.len(),
                row.len()
            )));
            continue;
        }
        if id.is_empty() {
            table.rejects.push(reject("missing image_id".into()));
            continue;
        }
        if seen.contains(id) {
            table.rejects.push(reject("duplicate id".into()));
            continue;
        }
        let Some(source) = Source::parse(row[source_col].trim()) else {
            table.rejects.push(reject(format!("invalid source `{}`", row[source_col].trim())));
            continue;
        };
        let mut record = AttributeRecord::new(id, source);
        for (def, &col) in schema.attributes.iter().zip(&attr_cols) {
            let cell = row[col].trim();
            if !cell.is_empty() {
                record.values.insert(def.name.clone(), cell.to_string());
            }
        }
        match record.check(schema) {
            Ok(()) => {
                seen.insert(id.to_string());
                table.records.push(record);
            }
            Err(reason) => table.rejects.push(reject(reason)),
        }
    }
    Ok(table)
}

/// Non-blank lines of a JSONL document as objects, with 1-based line numbers.
fn jsonl_objects(text: &str) -> impl Iterator<Item = (usize, std::result::Result<Map<String, Value>, String>)> + '_ {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let parsed = match serde_json::from_str::<Value>(line) {
                Ok(Value::Object(map)) => Ok(map),
                Ok(_) => Err("expected a JSON object".to_string()),
                Err(e) => Err(e.to_string()),
            };
            (i + 1, parsed)
        })
}

fn string_field(map: &Map<String, Value>, field: &str, line: usize) -> std::result::Result<String, String> {
    match map.get(field) {
        None | Some(Value::Null) => Err(format!("line {line}: missing field {field}")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("line {line}: field {field} is not a string")),
    }
}

/// Loads caption pairs (`image_id`, `reference`, `candidate`). Texts are
/// whitespace-normalized and must not be empty.
pub fn load_caption_pairs(path: impl AsRef<Path>) -> Result<Vec<CaptionPair>> {
    let path = path.as_ref();
    parse_caption_pairs(&read(path)?).map_err(|m| Error::parse(path, m))
}

pub fn parse_caption_pairs(text: &str) -> std::result::Result<Vec<CaptionPair>, String> {
    let mut pairs = Vec::new();
    for (line, obj) in jsonl_objects(text) {
        let obj = obj.map_err(|e| format!("line {line}: {e}"))?;
        let image_id = string_field(&obj, "image_id", line)?;
        let reference = collapse_whitespace(&string_field(&obj, "reference", line)?);
        let candidate = collapse_whitespace(&string_field(&obj, "candidate", line)?);
        for (name, value) in [("reference", &reference), ("candidate", &candidate)] {
            if value.is_empty() {
                return Err(format!("line {line}: empty {name}"));
            }
        }
        pairs.push(CaptionPair {
            image_id,
            reference,
            candidate,
        });
    }
    Ok(pairs)
}

/// Loads `(image_id, text)` captions, reading the text from `text_field`.
pub fn load_captions(path: impl AsRef<Path>, text_field: &str) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    parse_captions(&read(path)?, text_field).map_err(|m| Error::parse(path, m))
}

pub fn parse_captions(text: &str, text_field: &str) -> std::result::Result<Vec<(String, String)>, String> {
    jsonl_objects(text)
        .map(|(line, obj)| {
            let obj = obj.map_err(|e| format!("line {line}: {e}"))?;
            Ok((
                string_field(&obj, "image_id", line)?,
                collapse_whitespace(&string_field(&obj, text_field, line)?),
            ))
        })
        .collect()
}

/// Pairs references with candidates by `image_id`, in reference order.
/// Every id must appear exactly once on each side.
pub fn join_captions(
    references: &[(String, String)],
    candidates: &[(String, String)],
) -> Result<Vec<CaptionPair>> {
    let mut by_id: BTreeMap<&str, &str> = BTreeMap::new();
    for (id, text) in candidates {
        if by_id.insert(id, text).is_some() {
            return Err(Error::Invalid(format!("duplicate candidate for {id}")));
        }
    }
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(references.len());
    for (id, reference) in references {
        if !seen.insert(id.as_str()) {
            return Err(Error::Invalid(format!("duplicate reference for {id}")));
        }
        let candidate = by_id
            .remove(id.as_str())
            .ok_or_else(|| Error::Invalid(format!("no candidate caption for {id}")))?;
        if reference.is_empty() || candidate.is_empty() {
            return Err(Error::Invalid(format!("empty caption for {id}")));
        }
        pairs.push(CaptionPair {
            image_id: id.clone(),
            reference: reference.clone(),
            candidate: candidate.to_string(),
        });
    }
    if let Some(id) = by_id.keys().next() {
        return Err(Error::Invalid(format!("no reference caption for {id}")));
    }
    Ok(pairs)
}

/// Loads an embedding file: one object per line with `id`, `vector`, and an
/// optional `labels` object of string values. A leading line carrying `meta`
/// and no `id` is a header; its `meta.dim`, when present, must match.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    parse_embeddings(&read(path)?).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path, message),
        other => other,
    })
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingSet> {
    let mut ids = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut label_rows: Vec<BTreeMap<String, String>> = Vec::new();
    let mut declared_dim = None;
    let mut seen = HashSet::new();
    for (line, obj) in jsonl_objects(text) {
        let obj = obj.map_err(|e| Error::parse("<jsonl>", format!("line {line}: {e}")))?;
        if !obj.contains_key("id") && obj.contains_key("meta") {
            if !ids.is_empty() {
                return Err(Error::parse("<jsonl>", format!("line {line}: header after data")));
            }
            declared_dim = obj["meta"].get("dim").and_then(Value::as_u64).map(|d| d as usize);
            continue;
        }
        let id = string_field(&obj, "id", line).map_err(|m| Error::parse("<jsonl>", m))?;
        if !seen.insert(id.clone()) {
            return Err(Error::Embedding {
                id,
                message: "duplicate id".into(),
            });
        }
        let Some(Value::Array(raw)) = obj.get("vector") else {
            return Err(Error::Embedding {
                id,
                message: "missing vector".into(),
            });
        };
        let mut vector = Vec::with_capacity(raw.len());
        for x in raw {
            match x.as_f64() {
                Some(v) if v.is_finite() => vector.push(v),
                _ => {
                    return Err(Error::Embedding {
                        id,
                        message: "non-finite or non-numeric component".into(),
                    })
                }
            }
        }
        let expected = declared_dim.or_else(|| vectors.first().map(Vec::len));
        if let Some(d) = expected {
            if vector.len() != d {
                return Err(Error::Embedding {
                    message: format!("dimension {} does not match {d}", vector.len()),
                    id,
                });
            }
        }
        let mut labels = BTreeMap::new();
        match obj.get("labels") {
            None | Some(Value::Null) => {}
            Some(Value::Object(map)) => {
                for (k, v) in map {
                    let v = v.as_str().ok_or_else(|| Error::Embedding {
                        id: id.clone(),
                        message: format!("label {k} is not a string"),
                    })?;
                    labels.insert(k.clone(), v.to_string());
                }
            }
            Some(_) => {
                return Err(Error::Embedding {
                    id,
                    message: "labels must be an object".into(),
                })
            }
        }
        ids.push(id);
        vectors.push(vector);
        label_rows.push(labels);
    }
    let names: std::collections::BTreeSet<&String> = label_rows.iter().flat_map(|r| r.keys()).collect();
    let labels = names
        .into_iter()
        .map(|name| {
            (
                name.clone(),
                label_rows.iter().map(|r| r.get(name).cloned()).collect(),
            )
        })
        .collect();
    EmbeddingSet::new(ids, vectors, labels)
}

/// Loads a token-embedding file: JSONL lines `{"token", "vector"}`, with an
/// optional leading `meta` header. Vectors are returned as stored.
pub fn load_token_embeddings(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<f64>>> {
    let path = path.as_ref();
    parse_token_embeddings(&read(path)?).map_err(|m| Error::parse(path, m))
}

pub fn parse_token_embeddings(text: &str) -> std::result::Result<BTreeMap<String, Vec<f64>>, String> {
    let mut out = BTreeMap::new();
    let mut dim = None;
    for (idx, (line, obj)) in jsonl_objects(text).enumerate() {
        let obj = obj.map_err(|e| format!("line {line}: {e}"))?;
        if idx == 0 && !obj.contains_key("token") && obj.contains_key("meta") {
            dim = obj["meta"].get("dim").and_then(Value::as_u64).map(|d| d as usize);
            continue;
        }
        let token = string_field(&obj, "token", line)?;
        let vector = match obj.get("vector") {
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_f64().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| format!("token {token}: vector components must be finite numbers"))?,
            _ => return Err(format!("line {line}: missing field vector")),
        };
        if vector.is_empty() {
            return Err(format!("token {token}: empty vector"));
        }
        match dim {
            Some(d) if d != vector.len() => {
                return Err(format!("token {token}: dimension {} differs from {d}", vector.len()))
            }
            _ => dim = Some(vector.len()),
        }
        if out.insert(token.clone(), vector).is_some() {
            return Err(format!("duplicate token {token}"));
        }
    }
    Ok(out)
}

/// Loads an extraction file written by [`ExtractionResult::to_line`].
pub fn load_extractions(path: impl AsRef<Path>) -> Result<Vec<ExtractionResult>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ExtractionLine = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        out.push(parsed.into());
    }
    Ok(out)
}
