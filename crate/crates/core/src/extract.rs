//! Attribute extraction from free-text captions by controlled matching over a
//! compiled lexicon.
//!
//! Text is normalized first (lowercase, punctuation to spaces, intra-word
//! hyphens kept) and split into tokens. Patterns match whole tokens only, so
//! `small` never fires inside `smallish`. Matching runs on a per-attribute
//! token trie; a wildcard pattern token consumes exactly one text token.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use crate::error::Result;
use crate::types::{
    AttributeSchema, Conflict, ExtractedValue, ExtractionResult, Lexicon, PatternToken, Span,
};

/// Normalized text plus, for every char of `text`, the char offset it came
/// from in the original string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub offsets: Vec<usize>,
}

/// A token of normalized text with its char range in that text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

impl Normalized {
    pub fn tokens(&self) -> Vec<Token<'_>> {
        let mut out = Vec::new();
        let mut byte_start = 0;
        let mut char_pos = 0;
        for piece in self.text.split(' ') {
            let n = piece.chars().count();
            if n > 0 {
                out.push(Token {
                    text: &self.text[byte_start..byte_start + piece.len()],
                    start: char_pos,
                    end: char_pos + n,
                });
            }
            byte_start += piece.len() + 1;
            char_pos += n + 1;
        }
        out
    }

    /// Maps a char range of the normalized text back onto the original.
    pub fn original_span(&self, start: usize, end: usize) -> Span {
        debug_assert!(start < end && end <= self.offsets.len());
        Span {
            start: self.offsets[start],
            end: self.offsets[end - 1] + 1,
        }
    }
}

enum CharClass {
    Word(Vec<char>),
    Hyphen,
    Separator,
}

/// Lowercases, turns punctuation into single spaces (keeping hyphens between
/// word characters), collapses whitespace and trims.
pub fn normalize(text: &str) -> Normalized {
    let classes: Vec<CharClass> = text
        .chars()
        .map(|c| {
            if c == '-' {
                CharClass::Hyphen
            } else if c.is_alphanumeric() {
                let lower: Vec<char> = c.to_lowercase().filter(|l| l.is_alphanumeric()).collect();
                if lower.is_empty() {
                    CharClass::Separator
                } else {
                    CharClass::Word(lower)
                }
            } else {
                CharClass::Separator
            }
        })
        .collect();

    let mut out = String::with_capacity(text.len());
    let mut offsets = Vec::with_capacity(text.len());
    let mut pending_space = false;
    for (i, class) in classes.iter().enumerate() {
        let keep = match class {
            CharClass::Word(chars) => Some(chars.as_slice()),
            CharClass::Hyphen => {
                let prev = i > 0 && matches!(classes[i - 1], CharClass::Word(_));
                let next = matches!(classes.get(i + 1), Some(CharClass::Word(_)));
                (prev && next).then_some(&['-'][..])
            }
            CharClass::Separator => None,
        };
        match keep {
            Some(chars) => {
                if pending_space && !out.is_empty() {
                    out.push(' ');
                    offsets.push(i);
                }
                pending_space = false;
                for &c in chars {
                    out.push(c);
                    offsets.push(i);
                }
            }
            None => pending_space = true,
        }
    }
    Normalized { text: out, offsets }
}

/// One pattern occurrence in a token sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LexiconMatch {
    /// Index into [`CompiledLexicon::attributes`].
    pub attribute: usize,
    pub start: usize,
    pub len: usize,
    /// Index into the attribute's values (lexicon order).
    pub value: usize,
    /// Index into the value's patterns.
    pub pattern: usize,
}

#[derive(Default, Clone, Debug)]
struct Node {
    children: HashMap<String, usize>,
    wildcard: Option<usize>,
    terminals: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct AttributeMatcher {
    pub name: String,
    pub values: Vec<String>,
    pub patterns: Vec<Vec<String>>,
    nodes: Vec<Node>,
}

impl AttributeMatcher {
    fn insert(&mut self, tokens: &[PatternToken], terminal: (usize, usize)) {
        let mut node = 0;
        for tok in tokens {
            let next = match tok {
                PatternToken::Literal(t) => self.nodes[node].children.get(t).copied(),
                PatternToken::Wildcard => self.nodes[node].wildcard,
            };
            node = match next {
                Some(n) => n,
                None => {
                    let id = self.nodes.len();
                    self.nodes.push(Node::default());
                    match tok {
                        PatternToken::Literal(t) => {
                            self.nodes[node].children.insert(t.clone(), id);
                        }
                        PatternToken::Wildcard => self.nodes[node].wildcard = Some(id),
                    }
                    id
                }
            };
        }
        self.nodes[node].terminals.push(terminal);
    }

    /// All (value, pattern, length) triples matching at `start`.
    fn matches_at(&self, tokens: &[&str], start: usize, out: &mut Vec<(usize, usize, usize)>) {
        let mut stack = vec![(0usize, start)];
        while let Some((node, pos)) = stack.pop() {
            let n = &self.nodes[node];
            for &(v, p) in &n.terminals {
                out.push((v, p, pos - start));
            }
            if pos < tokens.len() {
                if let Some(&child) = n.children.get(tokens[pos]) {
                    stack.push((child, pos + 1));
                }
                if let Some(child) = n.wildcard {
                    stack.push((child, pos + 1));
                }
            }
        }
    }
}

/// Immutable matcher built from a [`Lexicon`]; shareable across threads.
#[derive(Clone, Debug)]
pub struct CompiledLexicon {
    pub attributes: Vec<AttributeMatcher>,
}

impl CompiledLexicon {
    pub fn compile(lexicon: &Lexicon) -> Result<Self> {
        lexicon.validate_structure()?;
        let attributes = lexicon
            .attributes
            .iter()
            .map(|attr| {
                let mut m = AttributeMatcher {
                    name: attr.name.clone(),
                    values: attr.values.iter().map(|v| v.value.clone()).collect(),
                    patterns: attr
                        .values
                        .iter()
                        .map(|v| v.patterns.iter().map(|p| p.text.clone()).collect())
                        .collect(),
                    nodes: vec![Node::default()],
                };
                for (vi, v) in attr.values.iter().enumerate() {
                    for (pi, p) in v.patterns.iter().enumerate() {
                        m.insert(&p.tokens, (vi, pi));
                    }
                }
                m
            })
            .collect();
        Ok(CompiledLexicon { attributes })
    }

    /// Every pattern occurrence, keeping at each (attribute, start) only the
    /// longest matches. Sorted by attribute, start, then value and pattern.
    pub fn find_matches(&self, tokens: &[&str]) -> Vec<LexiconMatch> {
        let mut out = Vec::new();
        let mut here = Vec::new();
        for (ai, matcher) in self.attributes.iter().enumerate() {
            for start in 0..tokens.len() {
                here.clear();
                matcher.matches_at(tokens, start, &mut here);
                let Some(longest) = here.iter().map(|m| m.2).max() else {
                    continue;
                };
                let mut kept: Vec<LexiconMatch> = here
                    .iter()
                    .filter(|m| m.2 == longest)
                    .map(|&(value, pattern, len)| LexiconMatch {
                        attribute: ai,
                        start,
                        len,
                        value,
                        pattern,
                    })
                    .collect();
                kept.sort();
                kept.dedup();
                out.extend(kept);
            }
        }
        out
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }
}

/// Extracts attribute values from one caption.
///
/// Per attribute, the earliest match wins (longest on ties). When patterns
/// of more than one value match anywhere in the caption, the winner is still
/// reported and a [`Conflict`] lists every competing value.
pub fn extract_attributes(
    image_id: &str,
    caption: &str,
    compiled: &CompiledLexicon,
    schema: &AttributeSchema,
) -> ExtractionResult {
    let norm = normalize(caption);
    let tokens = norm.tokens();
    let words: Vec<&str> = tokens.iter().map(|t| t.text).collect();
    let matches = compiled.find_matches(&words);

    let mut result = ExtractionResult {
        image_id: image_id.to_string(),
        ..Default::default()
    };
    for (ai, matcher) in compiled.attributes.iter().enumerate() {
        let Some(def) = schema.get(&matcher.name) else {
            continue;
        };
        let mut own: Vec<&LexiconMatch> = matches
            .iter()
            .filter(|m| m.attribute == ai && def.allows(&matcher.values[m.value]))
            .collect();
        if own.is_empty() {
            continue;
        }
        own.sort_by(|a, b| {
            a.start
                .cmp(&b.start)
                .then(b.len.cmp(&a.len))
                .then(a.value.cmp(&b.value))
                .then(a.pattern.cmp(&b.pattern))
        });
        let best = own[0];
        let first = &tokens[best.start];
        let last = &tokens[best.start + best.len - 1];
        result.values.insert(
            matcher.name.clone(),
            ExtractedValue {
                value: matcher.values[best.value].clone(),
                span: norm.original_span(first.start, last.end),
                matched_pattern: matcher.patterns[best.value][best.pattern].clone(),
            },
        );
        let distinct: BTreeSet<usize> = own
            .iter()
            .filter_map(|m| def.value_index(&matcher.values[m.value]))
            .collect();
        if distinct.len() > 1 {
            result.conflicts.push(Conflict {
                attribute: matcher.name.clone(),
                values: distinct
                    .into_iter()
                    .map(|i| def.allowed_values[i].clone())
                    .collect(),
            });
        }
    }
    result
}

/// Extraction over a corpus of `(image_id, caption)` pairs; output follows
/// input order.
pub fn extract_corpus(
    captions: &[(String, String)],
    compiled: &CompiledLexicon,
    schema: &AttributeSchema,
) -> Vec<ExtractionResult> {
    captions
        .par_iter()
        .map(|(id, text)| extract_attributes(id, text, compiled, schema))
        .collect()
}

/// Renderable patterns that also trigger another attribute's matcher.
/// Such overlaps can break synthesis/extraction round trips.
pub fn cross_attribute_overlaps(lexicon: &Lexicon, compiled: &CompiledLexicon) -> Vec<String> {
    let mut warnings = Vec::new();
    for attr in &lexicon.attributes {
        for v in &attr.values {
            for p in v.renderable() {
                let norm = normalize(&p.text);
                let tokens: Vec<&str> = norm.tokens().iter().map(|t| t.text).collect();
                for m in compiled.find_matches(&tokens) {
                    let other = &compiled.attributes[m.attribute];
                    if other.name != attr.name {
                        warnings.push(format!(
                            "pattern `{}` ({}={}) also matches {}={} via `{}`",
                            p.text,
                            attr.name,
                            v.value,
                            other.name,
                            other.values[m.value],
                            other.patterns[m.value][m.pattern]
                        ));
                    }
                }
            }
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> AttributeSchema {
        AttributeSchema::default_schema()
    }

    fn compiled() -> CompiledLexicon {
        CompiledLexicon::compile(&Lexicon::default_lexicon()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("Coarse, clumped chromatin.").text, "coarse clumped chromatin");
        assert_eq!(normalize("").text, "");
        assert_eq!(normalize("open-textured chromatin").text, "open-textured chromatin");
        assert_eq!(normalize("  -dash- a--b  x-").text, "dash a b x");
        assert_eq!(normalize("N:C ratio").text, "n c ratio");
    }

    #[test]
    fn offsets_point_back_into_original() {
        let src = "  Small, LYMPHOCYTE!";
        let n = normalize(src);
        assert_eq!(n.text, "small lymphocyte");
        let toks = n.tokens();
        assert_eq!(toks.len(), 2);
        let span = n.original_span(toks[1].start, toks[1].end);
        let orig: String = src.chars().skip(span.start).take(span.end - span.start).collect();
        assert_eq!(orig, "LYMPHOCYTE");
    }

    #[test]
    fn token_boundaries() {
        let c = compiled();
        let r = extract_attributes("x", "a smallish cell", &c, &schema());
        assert!(r.value("cell_size").is_none());
        let r = extract_attributes("x", "cells with scant cytoplasm here", &c, &schema());
        assert_eq!(r.value("cytoplasm_amount"), Some("scant"));
    }

    #[test]
    fn full_caption_example() {
        let r = extract_attributes(
            "c1",
            "Small lymphocyte with coarse chromatin and scant cytoplasm, consistent with CLL.",
            &compiled(),
            &schema(),
        );
        assert_eq!(r.value("cell_size"), Some("small"));
        assert_eq!(r.value("cell_type"), Some("lymphocyte"));
        assert_eq!(r.value("nuclear_chromatin_texture"), Some("coarse"));
        assert_eq!(r.value("cytoplasm_amount"), Some("scant"));
        assert_eq!(r.value("diagnosis"), Some("CLL"));
        assert_eq!(r.values.len(), 5);
        assert!(r.conflicts.is_empty());
        let span = r.values["diagnosis"].span;
        assert_eq!((span.start, span.end), (76, 79));
    }

    #[test]
    fn conflict_reports_earliest() {
        let r = extract_attributes("x", "small to medium cell", &compiled(), &schema());
        assert_eq!(r.value("cell_size"), Some("small"));
        assert_eq!(
            r.conflicts,
            vec![Conflict {
                attribute: "cell_size".into(),
                values: vec!["small".into(), "medium".into()]
            }]
        );
    }

    #[test]
    fn longest_pattern_shadows_shorter() {
        let lex = Lexicon::from_json(
            r#"{"attributes":[{"name":"nuclear_chromatin_texture","values":[
                {"value":"coarse","patterns":["clumped chromatin","coarse clumped chromatin"]}]}]}"#,
        )
        .unwrap();
        let c = CompiledLexicon::compile(&lex).unwrap();
        let m = c.find_matches(&["coarse", "clumped", "chromatin"]);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].start, m[0].len, m[0].pattern), (0, 3, 1));
        assert_eq!((m[1].start, m[1].len), (1, 2));
        let r = extract_attributes("x", "Coarse, clumped chromatin", &c, &schema());
        assert_eq!(r.values["nuclear_chromatin_texture"].matched_pattern, "coarse clumped chromatin");
    }

    #[test]
    fn wildcard_consumes_one_token() {
        let ambiguous = Lexicon::from_json(
            r#"{"attributes":[{"name":"nucleoli_visibility","values":[
                {"value":"prominent","patterns":["prominent nucleoli"]},
                {"value":"absent","patterns":["absent nucleoli","no * nucleoli"]}]}]}"#,
        )
        .unwrap();
        let err = CompiledLexicon::compile(&ambiguous).unwrap_err().to_string();
        assert!(err.contains("`prominent nucleoli`"), "{err}");
        assert!(err.contains("`no * nucleoli`"), "{err}");

        let lex = Lexicon::from_json(
            r#"{"attributes":[{"name":"nucleoli_visibility","values":[
                {"value":"prominent","patterns":["prominent nucleoli"]},
                {"value":"absent","patterns":["absent nucleoli","nucleoli * absent"]}]}]}"#,
        )
        .unwrap();
        let c = CompiledLexicon::compile(&lex).unwrap();
        let r = extract_attributes("x", "Nucleoli are absent.", &c, &schema());
        assert_eq!(r.value("nucleoli_visibility"), Some("absent"));
        assert_eq!(r.values["nucleoli_visibility"].matched_pattern, "nucleoli * absent");
        let r = extract_attributes("x", "nucleoli absent", &c, &schema());
        assert!(r.value("nucleoli_visibility").is_none());
    }

    #[test]
    fn default_lexicon_has_no_cross_attribute_overlaps() {
        let lex = Lexicon::default_lexicon();
        let c = CompiledLexicon::compile(&lex).unwrap();
        assert_eq!(cross_attribute_overlaps(&lex, &c), Vec::<String>::new());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize(&s).text;
            prop_assert_eq!(normalize(&once).text, once);
        }

        #[test]
        fn offsets_are_monotone_and_in_bounds(s in "\\PC{0,40}") {
            let n = normalize(&s);
            let len = s.chars().count();
            prop_assert_eq!(n.offsets.len(), n.text.chars().count());
            prop_assert!(n.offsets.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(n.offsets.iter().all(|&o| o < len));
        }

        #[test]
        fn spans_stay_within_caption(s in "(small|Large|coarse chromatin|CLL|[a-z]{1,6}|[ ,.;-]){0,12}") {
            let r = extract_attributes("p", &s, &compiled(), &schema());
            let len = s.chars().count();
            for v in r.values.values() {
                prop_assert!(v.span.start < v.span.end && v.span.end <= len);
            }
        }
    }
}
