//! Shared data model.

mod embedding;
mod lexicon;
mod record;
mod report;
mod schema;

pub use embedding::EmbeddingSet;
pub use lexicon::{AttributeEntry, Lexicon, Pattern, PatternToken, ValueEntry, DEFAULT_LEXICON, WILDCARD};
pub use record::{
    collapse_whitespace, AttributeRecord, CaptionPair, Conflict, ExtractedValue, ExtractionLine,
    ExtractionResult, Span, SpanLine,
};
pub use report::{
    harmonic_mean, CaptionMetrics, ClassMetrics, ClassifierReport, ConfusionMatrix,
    CorpusAggregate, PairScores, Prf,
};
pub use schema::{
    Applicability, AttributeDef, AttributeSchema, Source, DEFAULT_SCHEMA, REQUIRED_DEFAULT_ATTRIBUTES,
};
