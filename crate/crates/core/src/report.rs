//! Report fragments and their Markdown rendering as three fixed tables:
//! caption metrics, feature accuracy and classifier performance.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::attr_metrics::AttributeReport;
use crate::types::{ClassifierReport, CorpusAggregate};

/// Caption metrics of one model on the internal and optional external set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalFragment {
    pub model: String,
    pub internal: CorpusAggregate,
    #[serde(default)]
    pub external: Option<CorpusAggregate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttrFragment {
    pub model: String,
    pub internal: AttributeReport,
    #[serde(default)]
    pub external: Option<AttributeReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyFragment {
    pub backbone: String,
    pub task: String,
    pub internal: ClassifierReport,
    #[serde(default)]
    pub external: Option<ClassifierReport>,
}

/// All fragments of a combined report, each list in input order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub caption_metrics: Vec<EvalFragment>,
    pub feature_accuracy: Vec<AttrFragment>,
    pub classification: Vec<ClassifyFragment>,
}

const MISSING: &str = "-";

fn fixed(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| MISSING.to_string(), |x| format!("{x:.decimals$}"))
}

fn row(out: &mut String, cells: &[String]) {
    out.push_str("| ");
    out.push_str(&cells.join(" | "));
    out.push_str(" |\n");
}

fn header(out: &mut String, cells: &[String], first_left: usize) {
    row(out, cells);
    let rule: Vec<String> = (0..cells.len())
        .map(|i| if i < first_left { "---".to_string() } else { "---:".to_string() })
        .collect();
    row(out, &rule);
}

/// `cell_size` → `Cell size`
pub fn display_feature(name: &str) -> String {
    let spaced = name.replace('_', " ");
    let mut chars = spaced.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => spaced,
    }
}

fn caption_table(out: &mut String, fragments: &[EvalFragment]) {
    let with_external = fragments.iter().any(|f| f.external.is_some());
    let metrics = ["BLEU", "ROUGE-L", "BERTScore F1"];
    let mut cells = vec!["Model".to_string()];
    for set in if with_external { &["Int.", "Ext."][..] } else { &[""][..] } {
        for m in metrics {
            cells.push(if set.is_empty() { m.to_string() } else { format!("{m} ({set})") });
        }
    }
    out.push_str("### Caption generation metrics\n\n");
    header(out, &cells, 1);
    for f in fragments {
        let mut cells = vec![f.model.clone()];
        let mut push = |a: Option<&CorpusAggregate>| {
            cells.push(fixed(a.and_then(|a| a.bleu), 2));
            cells.push(fixed(a.and_then(|a| a.rouge_l_f), 2));
            cells.push(fixed(a.and_then(|a| a.bertscore_f), 2));
        };
        push(Some(&f.internal));
        if with_external {
            push(f.external.as_ref());
        }
        row(out, &cells);
    }
}

fn feature_table(out: &mut String, fragments: &[AttrFragment]) {
    let with_external = fragments.iter().any(|f| f.external.is_some());
    let mut cells = vec!["Feature".to_string()];
    for f in fragments {
        if with_external {
            cells.push(format!("{} (Int.)", f.model));
            cells.push(format!("{} (Ext.)", f.model));
        } else {
            cells.push(f.model.clone());
        }
    }
    // Feature order follows the first fragment; features never evaluated are omitted.
    let mut features: Vec<String> = Vec::new();
    for f in fragments {
        let reports = std::iter::once(&f.internal).chain(f.external.as_ref());
        for r in reports {
            for a in &r.accuracy.features {
                if a.n > 0 && !features.contains(&a.feature) {
                    features.push(a.feature.clone());
                }
            }
        }
    }
    out.push_str("### Feature-level accuracy (%)\n\n");
    header(out, &cells, 1);
    for feature in &features {
        let mut cells = vec![display_feature(feature)];
        let lookup = |r: Option<&AttributeReport>| {
            let acc = r
                .and_then(|r| r.accuracy.feature(feature))
                .filter(|a| a.n > 0)
                .map(|a| a.accuracy);
            fixed(acc, 2)
        };
        for f in fragments {
            cells.push(lookup(Some(&f.internal)));
            if with_external {
                cells.push(lookup(f.external.as_ref()));
            }
        }
        row(out, &cells);
    }
}

fn classification_table(out: &mut String, fragments: &[ClassifyFragment]) {
    let with_external = fragments.iter().any(|f| f.external.is_some());
    let mut cells = vec!["Task".to_string(), "Backbone".to_string()];
    if with_external {
        cells.extend(["Acc. (Int.)", "F1 (Int.)", "Acc. (Ext.)", "F1 (Ext.)"].map(String::from));
    } else {
        cells.extend(["Acc.", "F1"].map(String::from));
    }
    out.push_str("### Frozen-backbone classifier performance\n\n");
    header(out, &cells, 2);
    for f in fragments {
        let mut cells = vec![display_feature(&f.task), f.backbone.clone()];
        cells.push(fixed(Some(f.internal.accuracy), 3));
        cells.push(fixed(Some(f.internal.weighted_f1), 3));
        if with_external {
            cells.push(fixed(f.external.as_ref().map(|r| r.accuracy), 3));
            cells.push(fixed(f.external.as_ref().map(|r| r.weighted_f1), 3));
        }
        row(out, &cells);
    }
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.caption_metrics.is_empty() && self.feature_accuracy.is_empty() && self.classification.is_empty()
    }

    /// One table per non-empty fragment kind, always in the order caption
    /// metrics, feature accuracy, classification.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Evaluation report\n");
        if !self.caption_metrics.is_empty() {
            out.push('\n');
            caption_table(&mut out, &self.caption_metrics);
        }
        if !self.feature_accuracy.is_empty() {
            out.push('\n');
            feature_table(&mut out, &self.feature_accuracy);
        }
        if !self.classification.is_empty() {
            out.push('\n');
            classification_table(&mut out, &self.classification);
        }
        out
    }
}

/// Markdown tables for a single attribute report: accuracy with mention and
/// conflict rates, then plausible-error counts.
pub fn attribute_markdown(model: &str, report: &AttributeReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "### Feature-level accuracy: {model}\n");
    header(
        &mut out,
        &["Feature", "n", "Accuracy (%)", "Mention rate (%)", "Conflict rate (%)", "Plausible errors", "Errors"].map(String::from),
        1,
    );
    for (a, p) in report.accuracy.features.iter().zip(&report.plausible_errors) {
        row(
            &mut out,
            &[
                display_feature(&a.feature),
                a.n.to_string(),
                fixed(Some(a.accuracy), 2),
                fixed(Some(a.mention_rate), 2),
                fixed(Some(a.conflict_rate), 2),
                p.plausible_errors.to_string(),
                p.total_errors.to_string(),
            ],
        );
    }
    out
}
