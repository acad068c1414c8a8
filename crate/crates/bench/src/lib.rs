//! Deterministic workloads shared by the benchmarks.

use hemeval_core::synth::{CaptionSynth, TemplateSet};
use hemeval_core::{AttributeRecord, AttributeSchema, Lexicon, Source};

/// `n` records cycling through every permitted value; ids are `cell00000..`.
pub fn records(schema: &AttributeSchema, n: usize) -> Vec<AttributeRecord> {
    (0..n)
        .map(|i| {
            let source = if i % 2 == 0 { Source::Healthy } else { Source::Leukemic };
            let mut record = AttributeRecord::new(format!("cell{i:05}"), source);
            for (k, def) in schema.attributes.iter().enumerate() {
                if !def.applicability.applies_to(source) {
                    continue;
                }
                let allowed: Vec<&String> =
                    def.allowed_values.iter().filter(|v| def.allows_for(source, v)).collect();
                record = record.with(&def.name, allowed[(i / 2 + k) % allowed.len()]);
            }
            record
        })
        .collect()
}

/// `(image_id, text)` captions for `records(n)` under the bundled defaults.
pub fn captions(n: usize) -> Vec<(String, String)> {
    let schema = AttributeSchema::default_schema();
    let lexicon = Lexicon::default_lexicon();
    let templates = TemplateSet::default_templates();
    let synth = CaptionSynth::new(&schema, &lexicon, &templates).expect("bundled defaults are valid");
    synth
        .corpus(&records(&schema, n), 1, 0)
        .expect("bundled defaults render")
        .into_iter()
        .map(|c| (c.image_id, c.text))
        .collect()
}
