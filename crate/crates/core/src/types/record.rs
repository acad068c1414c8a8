use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{AttributeSchema, Source};

/// One cell's categorical attributes. Values of attributes that do not apply
/// to the cell's source are absent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub image_id: String,
    pub source: Source,
    pub values: BTreeMap<String, String>,
}

impl AttributeRecord {
    pub fn new(image_id: impl Into<String>, source: Source) -> Self {
        AttributeRecord {
            image_id: image_id.into(),
            source,
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, attribute: &str, value: &str) -> Self {
        self.values.insert(attribute.to_string(), value.to_string());
        self
    }

    pub fn get(&self, attribute: &str) -> Option<&str> {
        self.values.get(attribute).map(String::as_str)
    }

    /// First violated constraint, as a human-readable reason.
    ///
    /// A record is valid when every applicable attribute carries an allowed
    /// value and no non-applicable attribute carries one.
    pub fn check(&self, schema: &AttributeSchema) -> Result<(), String> {
        if self.image_id.is_empty() {
            return Err("missing image_id".into());
        }
        if let Some(name) = self.values.keys().find(|k| schema.get(k).is_none()) {
            return Err(format!("unknown attribute {name}"));
        }
        for def in &schema.attributes {
            let applies = def.applicability.applies_to(self.source);
            match (self.values.get(&def.name), applies) {
                (None, true) => return Err(format!("missing value for {}", def.name)),
                (None, false) => {}
                (Some(_), false) => {
                    return Err(format!(
                        "{} does not apply to {} cells",
                        def.name,
                        self.source.as_str()
                    ))
                }
                (Some(v), true) => {
                    if !def.allows(v) {
                        return Err(format!("invalid value for {}", def.name));
                    }
                    if !def.allows_for(self.source, v) {
                        return Err(format!(
                            "value {v} of {} not permitted for {} cells",
                            def.name,
                            self.source.as_str()
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Attributes that apply to this record and carry a value, in schema order.
    pub fn applicable<'a>(
        &'a self,
        schema: &'a AttributeSchema,
    ) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        schema
            .attributes
            .iter()
            .filter(move |d| d.applicability.applies_to(self.source))
            .filter_map(move |d| self.get(&d.name).map(|v| (d.name.as_str(), v)))
    }
}

/// Reference and model-generated caption for one image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionPair {
    pub image_id: String,
    pub reference: String,
    pub candidate: String,
}

/// Collapses whitespace runs to one space and trims the ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedValue {
    pub value: String,
    /// Character offsets into the original caption, end exclusive.
    pub span: Span,
    pub matched_pattern: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub attribute: String,
    /// Competing values in schema order.
    pub values: Vec<String>,
}

/// Attribute values recovered from one caption.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractionResult {
    pub image_id: String,
    pub values: BTreeMap<String, ExtractedValue>,
    pub conflicts: Vec<Conflict>,
}

impl ExtractionResult {
    pub fn value(&self, attribute: &str) -> Option<&str> {
        self.values.get(attribute).map(|v| v.value.as_str())
    }

    pub fn has_conflict(&self, attribute: &str) -> bool {
        self.conflicts.iter().any(|c| c.attribute == attribute)
    }

    pub fn to_line(&self) -> ExtractionLine {
        ExtractionLine {
            image_id: self.image_id.clone(),
            values: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), v.value.clone()))
                .collect(),
            conflicts: self.conflicts.clone(),
            spans: self
                .values
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        SpanLine {
                            start: v.span.start,
                            end: v.span.end,
                            pattern: v.matched_pattern.clone(),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// File form of an [`ExtractionResult`]: one JSON object per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionLine {
    pub image_id: String,
    pub values: BTreeMap<String, String>,
    #[serde(default)]
    pub conflicts: Vec<Conflict>,
    #[serde(default)]
    pub spans: BTreeMap<String, SpanLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanLine {
    pub start: usize,
    pub end: usize,
    pub pattern: String,
}

impl From<ExtractionLine> for ExtractionResult {
    fn from(line: ExtractionLine) -> Self {
        let values = line
            .values
            .into_iter()
            .map(|(k, value)| {
                let (span, matched_pattern) = match line.spans.get(&k) {
                    Some(s) => (
                        Span {
                            start: s.start,
                            end: s.end,
                        },
                        s.pattern.clone(),
                    ),
                    None => (Span { start: 0, end: 0 }, String::new()),
                };
                (
                    k,
                    ExtractedValue {
                        value,
                        span,
                        matched_pattern,
                    },
                )
            })
            .collect();
        ExtractionResult {
            image_id: line.image_id,
            values,
            conflicts: line.conflicts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cll() -> AttributeRecord {
        AttributeRecord::new("c1", Source::Leukemic)
            .with("cell_type", "lymphocyte")
            .with("diagnosis", "CLL")
            .with("cell_size", "small")
            .with("overall_shape", "round")
            .with("nuclear_shape", "round")
            .with("nuclear_chromatin_texture", "coarse")
            .with("cytoplasm_amount", "scant")
            .with("nucleoli_visibility", "absent")
            .with("basophilia", "slight")
    }

    #[test]
    fn valid_record_passes() {
        assert_eq!(cll().check(&AttributeSchema::default_schema()), Ok(()));
    }

    #[test]
    fn invalid_value_is_named() {
        let r = cll().with("nuclear_chromatin_texture", "purple");
        assert_eq!(
            r.check(&AttributeSchema::default_schema()).unwrap_err(),
            "invalid value for nuclear_chromatin_texture"
        );
    }

    #[test]
    fn source_restrictions() {
        let schema = AttributeSchema::default_schema();
        let mut r = cll();
        r.source = Source::Healthy;
        r.values.remove("nucleoli_visibility");
        r.values.remove("basophilia");
        r.values.insert("granularity".into(), "agranular".into());
        assert_eq!(
            r.check(&schema).unwrap_err(),
            "value CLL of diagnosis not permitted for healthy cells"
        );
        r.values.insert("diagnosis".into(), "healthy".into());
        assert_eq!(r.check(&schema), Ok(()));
        r.values.insert("cell_type".into(), "myeloblast".into());
        assert!(r.check(&schema).is_err());
    }

    #[test]
    fn non_applicable_value_rejected() {
        let r = cll().with("granularity", "granular");
        assert!(r
            .check(&AttributeSchema::default_schema())
            .unwrap_err()
            .contains("does not apply"));
    }

    #[test]
    fn collapse() {
        assert_eq!(collapse_whitespace("  a \t b\n\nc "), "a b c");
        assert_eq!(collapse_whitespace("   "), "");
    }
}
