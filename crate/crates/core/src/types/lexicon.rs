use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::normalize;
use crate::types::AttributeSchema;

/// Source text of the bundled default.
pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.json");

/// Pattern token meaning "any single token".
pub const WILDCARD: &str = "*";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PatternToken {
    Literal(String),
    Wildcard,
}

impl PatternToken {
    fn overlaps(&self, other: &PatternToken) -> bool {
        match (self, other) {
            (PatternToken::Literal(a), PatternToken::Literal(b)) => a == b,
            _ => true,
        }
    }
}

/// A surface pattern: a phrase in normalized token form, where `*` stands for
/// exactly one arbitrary token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub text: String,
    pub tokens: Vec<PatternToken>,
    /// False for extraction-only patterns (plurals, fragments).
    pub renderable: bool,
}

impl Pattern {
    pub fn parse(text: &str) -> Result<Pattern> {
        let mut tokens = Vec::new();
        for raw in text.split_whitespace() {
            if raw == WILDCARD {
                tokens.push(PatternToken::Wildcard);
            } else {
                tokens.extend(
                    normalize(raw)
                        .text
                        .split(' ')
                        .filter(|t| !t.is_empty())
                        .map(|t| PatternToken::Literal(t.to_string())),
                );
            }
        }
        if tokens.is_empty() {
            return Err(Error::Lexicon(format!("pattern `{text}` has no tokens")));
        }
        if tokens.iter().all(|t| *t == PatternToken::Wildcard) {
            return Err(Error::Lexicon(format!("pattern `{text}` is only wildcards")));
        }
        Ok(Pattern {
            text: text.to_string(),
            tokens,
            renderable: true,
        })
    }

    pub fn has_wildcard(&self) -> bool {
        self.tokens.contains(&PatternToken::Wildcard)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Whether `self` occurs as a contiguous token run inside `other`.
    /// Wildcards on either side are treated as matching anything.
    pub fn is_token_substring_of(&self, other: &Pattern) -> bool {
        let (a, b) = (&self.tokens, &other.tokens);
        if a.len() > b.len() {
            return false;
        }
        (0..=b.len() - a.len()).any(|off| a.iter().zip(&b[off..]).all(|(x, y)| x.overlaps(y)))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueEntry {
    pub value: String,
    /// Never empty; the first pattern is the canonical phrase.
    pub patterns: Vec<Pattern>,
}

impl ValueEntry {
    pub fn canonical(&self) -> &Pattern {
        &self.patterns[0]
    }

    /// Patterns usable as rendered text: not extraction-only, no wildcards.
    pub fn renderable(&self) -> impl Iterator<Item = &Pattern> {
        self.patterns
            .iter()
            .filter(|p| p.renderable && !p.has_wildcard())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeEntry {
    pub name: String,
    pub values: Vec<ValueEntry>,
}

impl AttributeEntry {
    pub fn value(&self, value: &str) -> Option<&ValueEntry> {
        self.values.iter().find(|v| v.value == value)
    }
}

/// Attribute → value → surface patterns. Drives both caption synthesis and
/// attribute extraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    pub attributes: Vec<AttributeEntry>,
}

#[derive(Serialize, Deserialize)]
struct LexiconFile {
    attributes: Vec<AttributeFile>,
}

#[derive(Serialize, Deserialize)]
struct AttributeFile {
    name: String,
    values: Vec<ValueFile>,
}

#[derive(Serialize, Deserialize)]
struct ValueFile {
    value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    canonical: Option<String>,
    #[serde(default)]
    patterns: Vec<String>,
    /// Matched during extraction, never rendered.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    extract_only: Vec<String>,
}

impl Lexicon {
    pub fn default_lexicon() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }

    /// Parses the JSON form. `canonical`, when given, becomes the first
    /// pattern; otherwise the first entry of `patterns` is canonical.
    /// Entries of `extract_only` are appended as non-renderable patterns.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: LexiconFile =
            serde_json::from_str(text).map_err(|e| Error::Lexicon(e.to_string()))?;
        let mut attributes = Vec::with_capacity(file.attributes.len());
        for attr in file.attributes {
            let mut values = Vec::with_capacity(attr.values.len());
            for v in attr.values {
                let mut texts: Vec<String> = v.canonical.into_iter().collect();
                for p in v.patterns {
                    if !texts.contains(&p) {
                        texts.push(p);
                    }
                }
                if texts.is_empty() {
                    return Err(Error::Lexicon(format!(
                        "{}={} has no patterns",
                        attr.name, v.value
                    )));
                }
                let mut patterns = texts
                    .iter()
                    .map(|t| Pattern::parse(t))
                    .collect::<Result<Vec<_>>>()?;
                for t in v.extract_only {
                    if !patterns.iter().any(|p| p.text == t) {
                        let mut p = Pattern::parse(&t)?;
                        p.renderable = false;
                        patterns.push(p);
                    }
                }
                values.push(ValueEntry {
                    value: v.value,
                    patterns,
                });
            }
            attributes.push(AttributeEntry {
                name: attr.name,
                values,
            });
        }
        Ok(Lexicon { attributes })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = LexiconFile {
            attributes: self
                .attributes
                .iter()
                .map(|a| AttributeFile {
                    name: a.name.clone(),
                    values: a
                        .values
                        .iter()
                        .map(|v| ValueFile {
                            value: v.value.clone(),
                            canonical: Some(v.canonical().text.clone()),
                            patterns: v.patterns[1..]
                                .iter()
                                .filter(|p| p.renderable)
                                .map(|p| p.text.clone())
                                .collect(),
                            extract_only: v
                                .patterns
                                .iter()
                                .filter(|p| !p.renderable)
                                .map(|p| p.text.clone())
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("lexicon serializes")
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeEntry> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn entry(&self, attribute: &str, value: &str) -> Option<&ValueEntry> {
        self.attribute(attribute).and_then(|a| a.value(value))
    }

    /// Checks coverage of `schema` on top of [`Lexicon::validate_structure`].
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        self.validate_structure()?;
        for attr in &self.attributes {
            let def = schema.get(&attr.name).ok_or_else(|| {
                Error::Lexicon(format!("attribute `{}` is not in the schema", attr.name))
            })?;
            if let Some(v) = attr.values.iter().find(|v| !def.allows(&v.value)) {
                return Err(Error::Lexicon(format!(
                    "{}: value `{}` is not in the schema",
                    attr.name, v.value
                )));
            }
        }
        for def in &schema.attributes {
            for value in &def.allowed_values {
                if self.entry(&def.name, value).is_none() {
                    return Err(Error::Lexicon(format!(
                        "no patterns for {}={}",
                        def.name, value
                    )));
                }
            }
        }
        Ok(())
    }

    /// Schema-independent checks: unique attributes and values, wildcard-free
    /// canonical phrases, and no pattern contained (as a token run) in a
    /// pattern of a different value of the same attribute.
    pub fn validate_structure(&self) -> Result<()> {
        for (ai, attr) in self.attributes.iter().enumerate() {
            if self.attributes[..ai].iter().any(|a| a.name == attr.name) {
                return Err(Error::Lexicon(format!("attribute `{}` listed twice", attr.name)));
            }
            for (i, v) in attr.values.iter().enumerate() {
                if attr.values[..i].iter().any(|w| w.value == v.value) {
                    return Err(Error::Lexicon(format!(
                        "{}: value `{}` listed twice",
                        attr.name, v.value
                    )));
                }
                if v.canonical().has_wildcard() || !v.canonical().renderable {
                    return Err(Error::Lexicon(format!(
                        "{}={}: canonical phrase `{}` contains a wildcard",
                        attr.name,
                        v.value,
                        v.canonical()
                    )));
                }
            }
            for (i, a) in attr.values.iter().enumerate() {
                for b in &attr.values[i + 1..] {
                    for pa in &a.patterns {
                        for pb in &b.patterns {
                            let clash = if pa.is_token_substring_of(pb) {
                                Some((pa, &a.value, pb, &b.value))
                            } else if pb.is_token_substring_of(pa) {
                                Some((pb, &b.value, pa, &a.value))
                            } else {
                                None
                            };
                            if let Some((inner, iv, outer, ov)) = clash {
                                return Err(Error::Lexicon(format!(
                                    "{}: pattern `{inner}` ({iv}) is contained in pattern `{outer}` ({ov})",
                                    attr.name
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(s: &str) -> PatternToken {
        PatternToken::Literal(s.into())
    }

    #[test]
    fn parse_normalizes_and_keeps_wildcards() {
        let p = Pattern::parse("Scant, * Cytoplasm").unwrap();
        assert_eq!(
            p.tokens,
            vec![lit("scant"), PatternToken::Wildcard, lit("cytoplasm")]
        );
        assert!(Pattern::parse("  ").is_err());
        assert!(Pattern::parse("* *").is_err());
    }

    #[test]
    fn token_substring() {
        let small = Pattern::parse("small").unwrap();
        let smallish = Pattern::parse("smallish cell").unwrap();
        let small_cell = Pattern::parse("a small cell").unwrap();
        assert!(!small.is_token_substring_of(&smallish));
        assert!(small.is_token_substring_of(&small_cell));
        let wild = Pattern::parse("* nucleoli").unwrap();
        let visible = Pattern::parse("no visible nucleoli").unwrap();
        assert!(wild.is_token_substring_of(&visible));
    }

    #[test]
    fn default_lexicon_is_valid_for_default_schema() {
        Lexicon::default_lexicon()
            .validate(&AttributeSchema::default_schema())
            .unwrap();
    }

    #[test]
    fn rejects_cross_value_substring_naming_both_patterns() {
        let schema = AttributeSchema::from_json(
            r#"{"attributes":[{"name":"nucleoli_visibility","allowed_values":["prominent","absent"],"applicability":"all"}]}"#,
        )
        .unwrap();
        let lex = Lexicon::from_json(
            r#"{"attributes":[{"name":"nucleoli_visibility","values":[
                {"value":"prominent","patterns":["visible nucleoli"]},
                {"value":"absent","patterns":["no visible nucleoli"]}]}]}"#,
        )
        .unwrap();
        let msg = lex.validate(&schema).unwrap_err().to_string();
        assert!(msg.contains("`visible nucleoli`"), "{msg}");
        assert!(msg.contains("`no visible nucleoli`"), "{msg}");
    }

    #[test]
    fn rejects_missing_coverage() {
        let schema = AttributeSchema::from_json(
            r#"{"attributes":[{"name":"cell_size","allowed_values":["small","large"],"applicability":"all"}]}"#,
        )
        .unwrap();
        let lex = Lexicon::from_json(
            r#"{"attributes":[{"name":"cell_size","values":[{"value":"small","patterns":["small"]}]}]}"#,
        )
        .unwrap();
        let msg = lex.validate(&schema).unwrap_err().to_string();
        assert!(msg.contains("cell_size=large"), "{msg}");
    }

    #[test]
    fn canonical_goes_first() {
        let lex = Lexicon::from_json(
            r#"{"attributes":[{"name":"a","values":[{"value":"x","canonical":"foo","patterns":["bar","foo"],"extract_only":["foos"]}]}]}"#,
        )
        .unwrap();
        let v = lex.entry("a", "x").unwrap();
        assert_eq!(v.canonical().text, "foo");
        assert_eq!(v.patterns.len(), 3);
        let rendered: Vec<_> = v.renderable().map(|p| p.text.as_str()).collect();
        assert_eq!(rendered, ["foo", "bar"]);
        let again = Lexicon::from_json(&lex.to_json()).unwrap();
        assert_eq!(again, lex);
    }
}
