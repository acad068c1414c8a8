//! Feature-level accuracy, confusion matrices and plausible-error rates
//! computed by joining extractions with ground-truth records.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AttributeRecord, AttributeSchema, ConfusionMatrix, ExtractionResult};

pub const UNMENTIONED: &str = "unmentioned";

/// Source text of the bundled default.
pub const DEFAULT_PLAUSIBILITY: &str = include_str!("../data/plausibility.json");

/// Extraction/truth pairs in truth order.
#[derive(Clone, Debug)]
pub struct Joined<'a> {
    pub samples: Vec<(&'a AttributeRecord, &'a ExtractionResult)>,
    /// Truth ids with no extraction; excluded from every count.
    pub unmatched_truth: Vec<String>,
}

/// Joins on `image_id`. Extractions whose id is absent from `truth` are fatal.
pub fn join<'a>(extracted: &'a [ExtractionResult], truth: &'a [AttributeRecord]) -> Result<Joined<'a>> {
    let truth_ids: HashMap<&str, ()> = truth.iter().map(|r| (r.image_id.as_str(), ())).collect();
    let missing: Vec<String> = extracted
        .iter()
        .filter(|e| !truth_ids.contains_key(e.image_id.as_str()))
        .map(|e| e.image_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Join(missing));
    }
    let mut by_id = HashMap::with_capacity(extracted.len());
    for e in extracted {
        if by_id.insert(e.image_id.as_str(), e).is_some() {
            return Err(Error::Invalid(format!("duplicate extraction for {}", e.image_id)));
        }
    }
    let mut joined = Joined { samples: Vec::new(), unmatched_truth: Vec::new() };
    for r in truth {
        match by_id.get(r.image_id.as_str()) {
            Some(e) => joined.samples.push((r, *e)),
            None => joined.unmatched_truth.push(r.image_id.clone()),
        }
    }
    Ok(joined)
}

/// One row of the accuracy table. Rates are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureAccuracy {
    pub feature: String,
    /// Joined samples whose truth defines the feature.
    pub n: u64,
    pub correct: u64,
    pub mentioned: u64,
    pub conflicted: u64,
    /// `correct / n`; an unmentioned feature counts as incorrect.
    pub accuracy: f64,
    pub mention_rate: f64,
    pub conflict_rate: f64,
    /// `correct / mentioned`, absent when nothing was mentioned.
    pub accuracy_when_mentioned: Option<f64>,
}

impl FeatureAccuracy {
    pub fn errors(&self) -> u64 {
        self.n - self.correct
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub n_samples: u64,
    pub features: Vec<FeatureAccuracy>,
    pub unmatched_truth: Vec<String>,
}

impl AccuracyTable {
    pub fn feature(&self, name: &str) -> Option<&FeatureAccuracy> {
        self.features.iter().find(|f| f.feature == name)
    }
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn tally(feature: &str, joined: &Joined<'_>) -> FeatureAccuracy {
    let (mut n, mut correct, mut mentioned, mut conflicted) = (0, 0, 0, 0);
    for (truth, extraction) in &joined.samples {
        let Some(expected) = truth.get(feature) else { continue };
        n += 1;
        if let Some(found) = extraction.value(feature) {
            mentioned += 1;
            if found == expected {
                correct += 1;
            }
        }
        if extraction.has_conflict(feature) {
            conflicted += 1;
        }
    }
    FeatureAccuracy {
        feature: feature.to_string(),
        n,
        correct,
        mentioned,
        conflicted,
        accuracy: percent(correct, n),
        mention_rate: percent(mentioned, n),
        conflict_rate: percent(conflicted, n),
        accuracy_when_mentioned: (mentioned > 0).then(|| percent(correct, mentioned)),
    }
}

/// Per-feature accuracy in schema order.
pub fn feature_accuracy(
    extracted: &[ExtractionResult],
    truth: &[AttributeRecord],
    schema: &AttributeSchema,
) -> Result<AccuracyTable> {
    let joined = join(extracted, truth)?;
    Ok(AccuracyTable {
        n_samples: joined.samples.len() as u64,
        features: schema.names().map(|f| tally(f, &joined)).collect(),
        unmatched_truth: joined.unmatched_truth,
    })
}

fn confusion_from_joined(feature: &str, joined: &Joined<'_>, schema: &AttributeSchema) -> Result<ConfusionMatrix> {
    let def = schema
        .get(feature)
        .ok_or_else(|| Error::Invalid(format!("unknown feature `{feature}`")))?;
    let rows = def.allowed_values.clone();
    let mut columns = rows.clone();
    columns.push(UNMENTIONED.to_string());
    let mut matrix = ConfusionMatrix::zeros(rows, columns);
    for (truth, extraction) in &joined.samples {
        let Some(expected) = truth.get(feature) else { continue };
        let row = def
            .value_index(expected)
            .ok_or_else(|| Error::Record { image_id: truth.image_id.clone(), message: format!("invalid value for {feature}") })?;
        let column = match extraction.value(feature) {
            None => def.allowed_values.len(),
            Some(v) => def.value_index(v).ok_or_else(|| Error::Record {
                image_id: extraction.image_id.clone(),
                message: format!("extracted value `{v}` is not a value of {feature}"),
            })?,
        };
        matrix.counts[row][column] += 1;
    }
    Ok(matrix)
}

/// Rows are truth values, columns extracted values plus [`UNMENTIONED`].
pub fn confusion_matrix(
    feature: &str,
    extracted: &[ExtractionResult],
    truth: &[AttributeRecord],
    schema: &AttributeSchema,
) -> Result<ConfusionMatrix> {
    confusion_from_joined(feature, &join(extracted, truth)?, schema)
}

/// Unordered value pairs per attribute that count as plausible confusions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlausibilityMap {
    pairs: BTreeMap<String, BTreeSet<(String, String)>>,
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl PlausibilityMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Coarse/open chromatin and small/medium cell size.
    pub fn default_map() -> Self {
        Self::from_json(DEFAULT_PLAUSIBILITY).expect("bundled plausibility map is valid")
    }

    pub fn insert(&mut self, attribute: &str, a: &str, b: &str) {
        self.pairs.entry(attribute.to_string()).or_default().insert(ordered(a, b));
    }

    pub fn contains(&self, attribute: &str, a: &str, b: &str) -> bool {
        self.pairs.get(attribute).is_some_and(|s| s.contains(&ordered(a, b)))
    }

    /// `{"attribute": [["a", "b"], ...]}`
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<(String, String)>> =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("plausibility map: {e}")))?;
        let mut map = Self::new();
        for (attribute, pairs) in raw {
            for (a, b) in pairs {
                if a == b {
                    return Err(Error::Invalid(format!("plausibility map: `{a}` paired with itself in {attribute}")));
                }
                map.insert(&attribute, &a, &b);
            }
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<&String, Vec<&(String, String)>> =
            self.pairs.iter().map(|(k, v)| (k, v.iter().collect())).collect();
        serde_json::to_string_pretty(&raw).expect("map serializes")
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        for (attribute, pairs) in &self.pairs {
            let def = schema
                .get(attribute)
                .ok_or_else(|| Error::Invalid(format!("plausibility map: unknown attribute `{attribute}`")))?;
            for v in pairs.iter().flat_map(|(a, b)| [a, b]) {
                if !def.allows(v) {
                    return Err(Error::Invalid(format!("plausibility map: `{v}` is not a value of {attribute}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlausibleErrors {
    pub feature: String,
    /// `plausible_errors / total_errors`, or 0 with `no_errors` set.
    pub rate: f64,
    pub plausible_errors: u64,
    pub total_errors: u64,
    pub no_errors: bool,
}

/// Off-diagonal cells are errors; `unmentioned` cells are never plausible.
pub fn plausible_error_rate(matrix: &ConfusionMatrix, plausibility: &PlausibilityMap, feature: &str) -> PlausibleErrors {
    let (mut plausible, mut total) = (0, 0);
    for (i, truth) in matrix.rows.iter().enumerate() {
        for (j, found) in matrix.columns.iter().enumerate() {
            let count = matrix.counts[i][j];
            if count == 0 || truth == found {
                continue;
            }
            total += count;
            if found != UNMENTIONED && plausibility.contains(feature, truth, found) {
                plausible += count;
            }
        }
    }
    PlausibleErrors {
        feature: feature.to_string(),
        rate: if total == 0 { 0.0 } else { plausible as f64 / total as f64 },
        plausible_errors: plausible,
        total_errors: total,
        no_errors: total == 0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub accuracy: AccuracyTable,
    pub confusion: BTreeMap<String, ConfusionMatrix>,
    pub plausible_errors: Vec<PlausibleErrors>,
}

/// Accuracy table, one confusion matrix per feature and plausible-error rates.
pub fn attribute_report(
    extracted: &[ExtractionResult],
    truth: &[AttributeRecord],
    schema: &AttributeSchema,
    plausibility: &PlausibilityMap,
) -> Result<AttributeReport> {
    plausibility.validate(schema)?;
    let joined = join(extracted, truth)?;
    let mut confusion = BTreeMap::new();
    let mut plausible_errors = Vec::new();
    for feature in schema.names() {
        let m = confusion_from_joined(feature, &joined, schema)?;
        plausible_errors.push(plausible_error_rate(&m, plausibility, feature));
        confusion.insert(feature.to_string(), m);
    }
    Ok(AttributeReport {
        accuracy: AccuracyTable {
            n_samples: joined.samples.len() as u64,
            features: schema.names().map(|f| tally(f, &joined)).collect(),
            unmatched_truth: joined.unmatched_truth,
        },
        confusion,
        plausible_errors,
    })
}
