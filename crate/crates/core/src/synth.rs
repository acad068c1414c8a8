//! Caption synthesis from attribute records.
//!
//! A template is literal text with three kinds of markup:
//!
//! * `{attribute}`: a slot rendered with one lexicon phrase for the record's
//!   value of that attribute;
//! * `<name>`: a connective, one of the variants listed under `name` in the
//!   template set's `connectives`;
//! * `[ ... ]`: an optional group, dropped when any slot inside it has no
//!   value in the record (e.g. leukemia-only attributes on a healthy cell).
//!
//! Slots outside optional groups are mandatory. Present attributes that the
//! chosen template does not mention are appended as a trailing sentence led
//! by a `remainder` connective.
//!
//! All choices are drawn from a SplitMix64 stream seeded by [`mix_seed`], so
//! corpora are reproducible across platforms and implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{extract_attributes, normalize, CompiledLexicon};
use crate::rng::{fnv1a64, splitmix64, SplitMix64};
use crate::types::{AttributeRecord, AttributeSchema, Lexicon};

/// Source text of the bundled default.
pub const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.json");

/// Connective group used to lead the trailing sentence of leftover attributes.
pub const REMAINDER_CONNECTIVE: &str = "remainder";
/// Lead used when the template set defines no `remainder` connective.
pub const DEFAULT_REMAINDER: &str = "Additional features include";

/// Attributes of which at least one must be a mandatory slot in every template.
pub const ANCHOR_ATTRIBUTES: [&str; 2] = ["cell_type", "diagnosis"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Slot(String),
    Connective(String),
    Optional(Vec<Segment>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub source: String,
    pub segments: Vec<Segment>,
}

impl Template {
    pub fn parse(source: &str) -> Result<Template> {
        let err = |msg: &str| Error::Template(format!("{msg} in `{source}`"));
        let mut top: Vec<Segment> = Vec::new();
        let mut group: Option<Vec<Segment>> = None;
        let mut literal = String::new();
        let mut chars = source.chars();
        while let Some(c) = chars.next() {
            let target = group.as_mut().unwrap_or(&mut top);
            match c {
                '{' | '<' => {
                    let close = if c == '{' { '}' } else { '>' };
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some(x) if x == close => break,
                            Some(x) => name.push(x),
                            None => return Err(err("unterminated slot")),
                        }
                    }
                    let name = name.trim().to_string();
                    if name.is_empty() {
                        return Err(err("empty slot"));
                    }
                    if !literal.is_empty() {
                        target.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    target.push(if c == '{' {
                        Segment::Slot(name)
                    } else {
                        Segment::Connective(name)
                    });
                }
                '[' => {
                    if group.is_some() {
                        return Err(err("nested optional group"));
                    }
                    if !literal.is_empty() {
                        top.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    group = Some(Vec::new());
                }
                ']' => {
                    let Some(mut g) = group.take() else {
                        return Err(err("unbalanced `]`"));
                    };
                    if !literal.is_empty() {
                        g.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    top.push(Segment::Optional(g));
                }
                '}' | '>' => return Err(err("unbalanced closing bracket")),
                _ => literal.push(c),
            }
        }
        if group.is_some() {
            return Err(err("unterminated optional group"));
        }
        if !literal.is_empty() {
            top.push(Segment::Literal(literal));
        }
        Ok(Template {
            source: source.to_string(),
            segments: top,
        })
    }

    /// Slot names with whether each is mandatory, in template order.
    pub fn slots(&self) -> Vec<(&str, bool)> {
        let mut out = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Slot(s) => out.push((s.as_str(), true)),
                Segment::Optional(g) => {
                    for inner in g {
                        if let Segment::Slot(s) = inner {
                            out.push((s.as_str(), false));
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }

    fn literals_and_connectives(&self) -> Vec<&Segment> {
        let mut out = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Optional(g) => out.extend(g.iter()),
                other => out.push(other),
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TemplateFile {
    templates: Vec<String>,
    #[serde(default)]
    connectives: BTreeMap<String, Vec<String>>,
}

/// Caption skeletons plus named connective variants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    pub templates: Vec<Template>,
    pub connectives: BTreeMap<String, Vec<String>>,
}

impl TemplateSet {
    pub fn new(templates: &[&str], connectives: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let templates = templates
            .iter()
            .map(|t| Template::parse(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(TemplateSet {
            templates,
            connectives,
        })
    }

    pub fn default_templates() -> Self {
        Self::from_json(DEFAULT_TEMPLATES).expect("bundled templates parse")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TemplateFile =
            serde_json::from_str(text).map_err(|e| Error::Template(e.to_string()))?;
        let refs: Vec<&str> = file.templates.iter().map(String::as_str).collect();
        Self::new(&refs, file.connectives)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that slots name schema attributes (each at most once per
    /// template), connectives are defined, and every template has a mandatory
    /// anchor slot (`cell_type` or `diagnosis`) plus a morphology slot.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Template("no templates".into()));
        }
        for (name, variants) in &self.connectives {
            if variants.is_empty() || variants.iter().any(|v| v.trim().is_empty()) {
                return Err(Error::Template(format!("connective <{name}> has an empty variant list or entry")));
            }
        }
        for t in &self.templates {
            let slots = t.slots();
            let mut seen = BTreeSet::new();
            for (slot, _) in &slots {
                if schema.get(slot).is_none() {
                    return Err(Error::Template(format!(
                        "slot {{{slot}}} is not a schema attribute in `{}`",
                        t.source
                    )));
                }
                if !seen.insert(*slot) {
                    return Err(Error::Template(format!(
                        "slot {{{slot}}} appears twice in `{}`",
                        t.source
                    )));
                }
            }
            for seg in t.literals_and_connectives() {
                if let Segment::Connective(name) = seg {
                    if !self.connectives.contains_key(name) {
                        return Err(Error::Template(format!(
                            "undefined connective <{name}> in `{}`",
                            t.source
                        )));
                    }
                }
            }
            if !slots
                .iter()
                .any(|(s, mandatory)| *mandatory && ANCHOR_ATTRIBUTES.contains(s))
            {
                return Err(Error::Template(format!(
                    "template needs a mandatory {{cell_type}} or {{diagnosis}} slot: `{}`",
                    t.source
                )));
            }
            if !slots.iter().any(|(s, _)| !ANCHOR_ATTRIBUTES.contains(s)) {
                return Err(Error::Template(format!(
                    "template needs at least one morphology slot: `{}`",
                    t.source
                )));
            }
        }
        Ok(())
    }

    /// Literal text or connective variants that would themselves match a
    /// lexicon pattern and so inject attribute mentions into captions.
    pub fn lint(&self, compiled: &CompiledLexicon) -> Vec<String> {
        let mut texts: BTreeSet<&str> = BTreeSet::new();
        for t in &self.templates {
            for seg in t.literals_and_connectives() {
                if let Segment::Literal(s) = seg {
                    texts.insert(s);
                }
            }
        }
        for variants in self.connectives.values() {
            texts.extend(variants.iter().map(String::as_str));
        }
        let mut warnings = Vec::new();
        for text in texts {
            let norm = normalize(text);
            let tokens: Vec<&str> = norm.tokens().iter().map(|t| t.text).collect();
            for m in compiled.find_matches(&tokens) {
                let attr = &compiled.attributes[m.attribute];
                warnings.push(format!(
                    "template text `{}` matches {}={} via `{}`",
                    text.trim(),
                    attr.name,
                    attr.values[m.value],
                    attr.patterns[m.value][m.pattern]
                ));
            }
        }
        warnings
    }
}

/// Seed of one caption variant:
/// `splitmix64(splitmix64(seed ^ fnv1a64(image_id)) ^ variant)`.
pub fn mix_seed(seed: u64, image_id: &str, variant: u64) -> u64 {
    splitmix64(record_seed(seed, image_id) ^ variant)
}

fn record_seed(seed: u64, image_id: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(image_id.as_bytes()))
}

/// One synthesized caption.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthCaption {
    pub image_id: String,
    pub variant: usize,
    pub text: String,
}

/// Renders records into captions with a fixed schema, lexicon and template set.
#[derive(Clone, Copy, Debug)]
pub struct CaptionSynth<'a> {
    schema: &'a AttributeSchema,
    lexicon: &'a Lexicon,
    templates: &'a TemplateSet,
}

fn fix_article(out: &mut String, phrase: &str) {
    if !out.ends_with(' ') {
        return;
    }
    let body = &out[..out.len() - 1];
    let word_start = body.rfind(char::is_whitespace).map_or(0, |i| i + 1);
    let word = &body[word_start..];
    let capital = match word {
        "a" | "an" => false,
        "A" | "An" => true,
        _ => return,
    };
    let vowel = phrase
        .chars()
        .next()
        .is_some_and(|c| "aeiouAEIOU".contains(c));
    let article = match (vowel, capital) {
        (true, true) => "An",
        (true, false) => "an",
        (false, true) => "A",
        (false, false) => "a",
    };
    out.replace_range(word_start..body.len(), article);
}

fn join_phrases(phrases: &[String]) -> String {
    match phrases {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

impl<'a> CaptionSynth<'a> {
    pub fn new(
        schema: &'a AttributeSchema,
        lexicon: &'a Lexicon,
        templates: &'a TemplateSet,
    ) -> Result<Self> {
        lexicon.validate(schema)?;
        templates.validate(schema)?;
        Ok(CaptionSynth {
            schema,
            lexicon,
            templates,
        })
    }

    pub fn render(&self, record: &AttributeRecord, seed: u64) -> Result<String> {
        self.render_variant(record, seed, 0)
    }

    /// Variant `k` uses template `(record_seed % T + k) % T`, so consecutive
    /// variants use different templates whenever there is more than one, and
    /// draws every other choice from `mix_seed(seed, image_id, k)`.
    pub fn render_variant(&self, record: &AttributeRecord, seed: u64, variant: usize) -> Result<String> {
        record.check(self.schema).map_err(|m| Error::Record {
            image_id: record.image_id.clone(),
            message: m,
        })?;
        let n_templates = self.templates.templates.len();
        let base = (record_seed(seed, &record.image_id) % n_templates as u64) as usize;
        let template = &self.templates.templates[(base + variant) % n_templates];
        let mut rng = SplitMix64::new(mix_seed(seed, &record.image_id, variant as u64));

        let present: BTreeMap<&str, &str> = record.applicable(self.schema).collect();
        for (slot, mandatory) in template.slots() {
            if mandatory && !present.contains_key(slot) {
                return Err(Error::Record {
                    image_id: record.image_id.clone(),
                    message: format!("missing value for mandatory slot {{{slot}}}"),
                });
            }
        }

        let mut out = String::new();
        for seg in &template.segments {
            match seg {
                Segment::Optional(group) => {
                    let complete = group.iter().all(|s| match s {
                        Segment::Slot(name) => present.contains_key(name.as_str()),
                        _ => true,
                    });
                    if complete {
                        for inner in group {
                            self.render_segment(inner, &present, &mut rng, &mut out);
                        }
                    }
                }
                other => self.render_segment(other, &present, &mut rng, &mut out),
            }
        }

        let mentioned: BTreeSet<&str> = template.slots().into_iter().map(|(s, _)| s).collect();
        let leftovers: Vec<String> = self
            .schema
            .attributes
            .iter()
            .filter(|d| !mentioned.contains(d.name.as_str()))
            .filter_map(|d| present.get(d.name.as_str()).map(|v| (d.name.as_str(), *v)))
            .map(|(attr, value)| self.phrase(attr, value, &mut rng))
            .collect();
        if !leftovers.is_empty() {
            let lead = match self.templates.connectives.get(REMAINDER_CONNECTIVE) {
                Some(variants) => variants[rng.choose(variants.len())].as_str(),
                None => DEFAULT_REMAINDER,
            };
            out.push(' ');
            out.push_str(lead);
            out.push(' ');
            out.push_str(&join_phrases(&leftovers));
            out.push('.');
        }

        let mut text = out.split_whitespace().collect::<Vec<_>>().join(" ");
        if let Some(first) = text.chars().next() {
            if first.is_lowercase() {
                let upper: String = first.to_uppercase().collect();
                text.replace_range(..first.len_utf8(), &upper);
            }
        }
        Ok(text)
    }

    fn phrase(&self, attribute: &str, value: &str, rng: &mut SplitMix64) -> String {
        let entry = self
            .lexicon
            .entry(attribute, value)
            .expect("lexicon covers schema");
        let options: Vec<&str> = entry.renderable().map(|p| p.text.as_str()).collect();
        options[rng.choose(options.len())].to_string()
    }

    fn render_segment(
        &self,
        seg: &Segment,
        present: &BTreeMap<&str, &str>,
        rng: &mut SplitMix64,
        out: &mut String,
    ) {
        match seg {
            Segment::Literal(s) => out.push_str(s),
            Segment::Connective(name) => {
                let variants = &self.templates.connectives[name];
                out.push_str(&variants[rng.choose(variants.len())]);
            }
            Segment::Slot(name) => {
                let phrase = self.phrase(name, present[name.as_str()], rng);
                fix_article(out, &phrase);
                out.push_str(&phrase);
            }
            Segment::Optional(_) => unreachable!("optional groups do not nest"),
        }
    }

    /// `variants_per_record` captions per record, in record order.
    pub fn corpus(
        &self,
        records: &[AttributeRecord],
        variants_per_record: usize,
        seed: u64,
    ) -> Result<Vec<SynthCaption>> {
        if variants_per_record == 0 {
            return Err(Error::Invalid("variants_per_record must be at least 1".into()));
        }
        let per_record: Vec<Result<Vec<SynthCaption>>> = records
            .par_iter()
            .map(|r| {
                (0..variants_per_record)
                    .map(|k| {
                        Ok(SynthCaption {
                            image_id: r.image_id.clone(),
                            variant: k,
                            text: self.render_variant(r, seed, k)?,
                        })
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(records.len() * variants_per_record);
        for captions in per_record {
            out.extend(captions?);
        }
        Ok(out)
    }
}

pub fn render_caption(
    record: &AttributeRecord,
    templates: &TemplateSet,
    lexicon: &Lexicon,
    schema: &AttributeSchema,
    seed: u64,
) -> Result<String> {
    CaptionSynth::new(schema, lexicon, templates)?.render(record, seed)
}

pub fn synth_corpus(
    records: &[AttributeRecord],
    templates: &TemplateSet,
    lexicon: &Lexicon,
    schema: &AttributeSchema,
    variants_per_record: usize,
    seed: u64,
) -> Result<Vec<SynthCaption>> {
    CaptionSynth::new(schema, lexicon, templates)?.corpus(records, variants_per_record, seed)
}

/// Outcome of checking a caption against the record it should describe.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Faithfulness {
    pub missing: Vec<String>,
    pub contradicted: Vec<String>,
    pub conflicted: Vec<String>,
}

impl Faithfulness {
    pub fn passed(&self) -> bool {
        self.missing.is_empty() && self.contradicted.is_empty() && self.conflicted.is_empty()
    }
}

/// Passes iff extraction recovers every applicable attribute of `record`
/// with its value and without a competing value.
pub fn verify_faithfulness(
    caption: &str,
    record: &AttributeRecord,
    compiled: &CompiledLexicon,
    schema: &AttributeSchema,
) -> Faithfulness {
    let extracted = extract_attributes(&record.image_id, caption, compiled, schema);
    let mut report = Faithfulness::default();
    for (attr, value) in record.applicable(schema) {
        match extracted.value(attr) {
            None => report.missing.push(attr.to_string()),
            Some(v) if v != value => report.contradicted.push(attr.to_string()),
            Some(_) if extracted.has_conflict(attr) => report.conflicted.push(attr.to_string()),
            Some(_) => {}
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Source;
    use proptest::prelude::*;

    fn small_schema() -> AttributeSchema {
        AttributeSchema::from_json(
            r#"{"attributes":[
              {"name":"cell_type","allowed_values":["lymphocyte","myeloblast"],"applicability":"all"},
              {"name":"cell_size","allowed_values":["small","large"],"applicability":"all"},
              {"name":"nuclear_chromatin_texture","allowed_values":["coarse","open"],"applicability":"all"},
              {"name":"diagnosis","allowed_values":["CLL","AML"],"applicability":"all"}]}"#,
        )
        .unwrap()
    }

    fn small_lexicon() -> Lexicon {
        Lexicon::from_json(
            r#"{"attributes":[
              {"name":"cell_type","values":[{"value":"lymphocyte","patterns":["lymphocyte"]},{"value":"myeloblast","patterns":["myeloblast"]}]},
              {"name":"cell_size","values":[{"value":"small","patterns":["small"]},{"value":"large","patterns":["large"]}]},
              {"name":"nuclear_chromatin_texture","values":[{"value":"coarse","patterns":["coarse"]},{"value":"open","patterns":["open"]}]},
              {"name":"diagnosis","values":[{"value":"CLL","patterns":["CLL"]},{"value":"AML","patterns":["AML"]}]}]}"#,
        )
        .unwrap()
    }

    fn cll_record() -> AttributeRecord {
        AttributeRecord::new("c1", Source::Leukemic)
            .with("cell_type", "lymphocyte")
            .with("cell_size", "small")
            .with("nuclear_chromatin_texture", "coarse")
            .with("diagnosis", "CLL")
    }

    #[test]
    fn direct_substitution() {
        let templates = TemplateSet::new(
            &["A {cell_size} {cell_type} with {nuclear_chromatin_texture} chromatin, consistent with {diagnosis}."],
            BTreeMap::new(),
        )
        .unwrap();
        let text =
            render_caption(&cll_record(), &templates, &small_lexicon(), &small_schema(), 0).unwrap();
        assert_eq!(text, "A small lymphocyte with coarse chromatin, consistent with CLL.");
    }

    #[test]
    fn deterministic_for_same_seed() {
        let schema = AttributeSchema::default_schema();
        let lexicon = Lexicon::default_lexicon();
        let templates = TemplateSet::default_templates();
        let synth = CaptionSynth::new(&schema, &lexicon, &templates).unwrap();
        let record = default_record();
        assert_eq!(synth.render(&record, 42).unwrap(), synth.render(&record, 42).unwrap());
    }

    #[test]
    fn article_follows_phrase() {
        let mut s = String::from("A ");
        fix_article(&mut s, "irregular outline");
        assert_eq!(s, "An ");
        let mut s = String::from("with an ");
        fix_article(&mut s, "round nucleus");
        assert_eq!(s, "with a ");
        let mut s = String::from("banana ");
        fix_article(&mut s, "irregular");
        assert_eq!(s, "banana ");
    }

    #[test]
    fn missing_mandatory_slot_is_named() {
        let templates =
            TemplateSet::new(&["{cell_type} with {cell_size} size"], BTreeMap::new()).unwrap();
        let mut r = cll_record();
        r.values.remove("cell_size");
        let lexicon = small_lexicon();
        let schema = AttributeSchema::from_json(
            r#"{"attributes":[
              {"name":"cell_type","allowed_values":["lymphocyte","myeloblast"],"applicability":"all"},
              {"name":"cell_size","allowed_values":["small","large"],"applicability":"healthy_only"},
              {"name":"nuclear_chromatin_texture","allowed_values":["coarse","open"],"applicability":"all"},
              {"name":"diagnosis","allowed_values":["CLL","AML"],"applicability":"all"}]}"#,
        )
        .unwrap();
        let err = render_caption(&r, &templates, &lexicon, &schema, 1).unwrap_err();
        assert!(err.to_string().contains("{cell_size}"), "{err}");
    }

    #[test]
    fn optional_group_and_remainder() {
        let templates = TemplateSet::new(
            &["{cell_type}[ with {basophilia}]."],
            BTreeMap::from([("remainder".to_string(), vec!["Also:".to_string()])]),
        )
        .unwrap();
        let schema = AttributeSchema::default_schema();
        let lexicon = Lexicon::default_lexicon();
        let synth = CaptionSynth::new(&schema, &lexicon, &templates).unwrap();
        let mut healthy = AttributeRecord::new("h1", Source::Healthy);
        for (k, v) in [
            ("cell_type", "neutrophil"),
            ("diagnosis", "healthy"),
            ("cell_size", "medium"),
            ("overall_shape", "round"),
            ("nuclear_shape", "multilobed"),
            ("nuclear_chromatin_texture", "coarse"),
            ("cytoplasm_amount", "abundant"),
            ("granularity", "granular"),
        ] {
            healthy.values.insert(k.into(), v.into());
        }
        let text = synth.render(&healthy, 3).unwrap();
        assert!(text.contains(". Also: "), "{text}");
        assert!(!text.contains(" with "), "{text}");
        let compiled = CompiledLexicon::compile(&lexicon).unwrap();
        assert!(verify_faithfulness(&text, &healthy, &compiled, &schema).passed(), "{text}");
    }

    #[test]
    fn template_validation() {
        let schema = AttributeSchema::default_schema();
        let bad = |t: &str| TemplateSet::new(&[t], BTreeMap::new()).unwrap().validate(&schema);
        assert!(bad("{cell_size} only").is_err());
        assert!(bad("[{cell_type}] {cell_size}").is_err());
        assert!(bad("{cell_type} alone").is_err());
        assert!(bad("{cell_type} {cell_size} {cell_size}").is_err());
        assert!(bad("{cell_type} {colour}").is_err());
        assert!(bad("{cell_type} <missing> {cell_size}").is_err());
        assert!(bad("{cell_type} {cell_size}").is_ok());
        assert!(Template::parse("{cell_type").is_err());
        assert!(Template::parse("[a [b]]").is_err());
        assert!(Template::parse("a ] b").is_err());
    }

    #[test]
    fn default_templates_are_valid_and_clean() {
        let schema = AttributeSchema::default_schema();
        let templates = TemplateSet::default_templates();
        templates.validate(&schema).unwrap();
        let compiled = CompiledLexicon::compile(&Lexicon::default_lexicon()).unwrap();
        assert_eq!(templates.lint(&compiled), Vec::<String>::new());
    }

    #[test]
    fn faithfulness_failures() {
        let schema = small_schema();
        let compiled = CompiledLexicon::compile(&small_lexicon()).unwrap();
        let record = cll_record();
        let f = verify_faithfulness("A small lymphocyte with open chromatin, CLL.", &record, &compiled, &schema);
        assert_eq!(f.contradicted, ["nuclear_chromatin_texture"]);
        let f = verify_faithfulness("A small lymphocyte with coarse chromatin.", &record, &compiled, &schema);
        assert_eq!(f.missing, ["diagnosis"]);
        assert!(!f.passed());
        let f = verify_faithfulness("small coarse lymphocyte, CLL or AML", &record, &compiled, &schema);
        assert_eq!(f.conflicted, ["diagnosis"]);
    }

    #[test]
    fn mix_seed_is_stable() {
        // Frozen so that corpora stay reproducible across releases.
        assert_eq!(mix_seed(0, "", 0), splitmix64(splitmix64(0xcbf2_9ce4_8422_2325)));
        assert_ne!(mix_seed(1, "c1", 0), mix_seed(1, "c1", 1));
        assert_ne!(mix_seed(1, "c1", 0), mix_seed(2, "c1", 0));
    }

    fn default_record() -> AttributeRecord {
        AttributeRecord::new("c7", Source::Leukemic)
            .with("cell_type", "myeloblast")
            .with("diagnosis", "AML")
            .with("cell_size", "large")
            .with("overall_shape", "irregular")
            .with("nuclear_shape", "irregular")
            .with("nuclear_chromatin_texture", "open")
            .with("cytoplasm_amount", "scant")
            .with("nucleoli_visibility", "prominent")
            .with("basophilia", "deep")
    }

    #[test]
    fn consecutive_variants_use_different_templates() {
        let schema = AttributeSchema::default_schema();
        let lexicon = Lexicon::default_lexicon();
        let templates = TemplateSet::default_templates();
        let captions = synth_corpus(&[default_record()], &templates, &lexicon, &schema, 3, 9).unwrap();
        assert_eq!(captions.len(), 3);
        assert_ne!(captions[0].text, captions[1].text);
        assert_ne!(captions[1].text, captions[2].text);
        assert!(synth_corpus(&[default_record()], &templates, &lexicon, &schema, 0, 9).is_err());
    }

    proptest! {
        #[test]
        fn seed_changes_surface_not_content(seed_a in any::<u64>(), seed_b in any::<u64>()) {
            let schema = AttributeSchema::default_schema();
            let lexicon = Lexicon::default_lexicon();
            let templates = TemplateSet::default_templates();
            let compiled = CompiledLexicon::compile(&lexicon).unwrap();
            let synth = CaptionSynth::new(&schema, &lexicon, &templates).unwrap();
            let record = default_record();
            let a = extract_attributes("x", &synth.render(&record, seed_a).unwrap(), &compiled, &schema);
            let b = extract_attributes("x", &synth.render(&record, seed_b).unwrap(), &compiled, &schema);
            let keys_a: Vec<_> = a.values.keys().collect();
            let keys_b: Vec<_> = b.values.keys().collect();
            prop_assert_eq!(keys_a, keys_b);
        }
    }
}
