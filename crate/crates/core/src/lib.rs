//! Morphology-aware caption toolkit for blood-cell images.
//!
//! Builds caption corpora from structured attribute records, recovers the
//! attributes from free text, and scores captions and frozen embeddings.

pub mod attr_metrics;
pub mod classify;
pub mod error;
pub mod extract;
pub mod ingest;
pub mod rng;
pub mod report;
pub mod synth;
pub mod text_metrics;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
