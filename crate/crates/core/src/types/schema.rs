use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source text of the bundled default.
pub const DEFAULT_SCHEMA: &str = include_str!("../../data/schema.json");

/// Attributes every default schema must provide.
pub const REQUIRED_DEFAULT_ATTRIBUTES: [&str; 9] = [
    "cell_type",
    "diagnosis",
    "cell_size",
    "nuclear_shape",
    "overall_shape",
    "nuclear_chromatin_texture",
    "cytoplasm_amount",
    "nucleoli_visibility",
    "basophilia",
];

/// Which side of the dataset a cell comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Healthy,
    Leukemic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Healthy => "healthy",
            Source::Leukemic => "leukemic",
        }
    }

    pub fn parse(s: &str) -> Option<Source> {
        match s {
            "healthy" => Some(Source::Healthy),
            "leukemic" => Some(Source::Leukemic),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Applicability {
    All,
    HealthyOnly,
    LeukemicOnly,
}

impl Applicability {
    pub fn applies_to(self, source: Source) -> bool {
        match self {
            Applicability::All => true,
            Applicability::HealthyOnly => source == Source::Healthy,
            Applicability::LeukemicOnly => source == Source::Leukemic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub allowed_values: Vec<String>,
    pub applicability: Applicability,
    /// Optional per-source restriction of `allowed_values`, e.g. healthy
    /// cells may only carry the five mature leukocyte types.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub allowed_by_source: BTreeMap<Source, Vec<String>>,
}

impl AttributeDef {
    pub fn allows(&self, value: &str) -> bool {
        self.allowed_values.iter().any(|v| v == value)
    }

    pub fn allows_for(&self, source: Source, value: &str) -> bool {
        match self.allowed_by_source.get(&source) {
            Some(subset) => subset.iter().any(|v| v == value),
            None => self.allows(value),
        }
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.allowed_values.iter().position(|v| v == value)
    }
}

/// Ordered, closed-vocabulary attribute definitions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<AttributeDef>,
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl AttributeSchema {
    pub fn new(attributes: Vec<AttributeDef>) -> Result<Self> {
        let schema = AttributeSchema { attributes };
        schema.validate()?;
        Ok(schema)
    }

    /// The schema shipped with the crate (`data/schema.json`).
    pub fn default_schema() -> Self {
        Self::from_json(DEFAULT_SCHEMA).expect("bundled schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: AttributeSchema =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for attr in &self.attributes {
            if !is_identifier(&attr.name) {
                return Err(Error::Schema(format!(
                    "attribute name `{}` is not an identifier",
                    attr.name
                )));
            }
            if !names.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute `{}`", attr.name)));
            }
            if attr.allowed_values.is_empty() {
                return Err(Error::Schema(format!(
                    "attribute `{}` has no allowed values",
                    attr.name
                )));
            }
            let mut seen = HashSet::new();
            for v in &attr.allowed_values {
                if !is_identifier(v) {
                    return Err(Error::Schema(format!(
                        "value `{v}` of `{}` is not an identifier",
                        attr.name
                    )));
                }
                if !seen.insert(v.as_str()) {
                    return Err(Error::Schema(format!(
                        "duplicate value `{v}` in `{}`",
                        attr.name
                    )));
                }
            }
            for (source, subset) in &attr.allowed_by_source {
                if !attr.applicability.applies_to(*source) {
                    return Err(Error::Schema(format!(
                        "`{}` restricts values for {} cells but does not apply to them",
                        attr.name,
                        source.as_str()
                    )));
                }
                if let Some(v) = subset.iter().find(|v| !attr.allows(v)) {
                    return Err(Error::Schema(format!(
                        "`{}`: source restriction lists unknown value `{v}`",
                        attr.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }
}
