use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Frozen image embeddings with optional per-item class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    /// label-name → one entry per item (`None` when the item lacks the label).
    pub labels: BTreeMap<String, Vec<Option<String>>>,
}

impl EmbeddingSet {
    pub fn new(
        ids: Vec<String>,
        vectors: Vec<Vec<f64>>,
        labels: BTreeMap<String, Vec<Option<String>>>,
    ) -> Result<Self> {
        let set = EmbeddingSet {
            ids,
            vectors,
            labels,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ids.len() != self.vectors.len() {
            return Err(Error::Invalid(format!(
                "{} ids but {} vectors",
                self.ids.len(),
                self.vectors.len()
            )));
        }
        for (name, list) in &self.labels {
            if list.len() != self.ids.len() {
                return Err(Error::Invalid(format!(
                    "label `{name}` has {} entries for {} items",
                    list.len(),
                    self.ids.len()
                )));
            }
        }
        let dim = self.dim();
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            if v.len() != dim {
                return Err(Error::Embedding {
                    id: id.clone(),
                    message: format!("dimension {} does not match {dim}", v.len()),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Embedding {
                    id: id.clone(),
                    message: "non-finite component".into(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Dimension of the vectors, 0 for an empty set.
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn label(&self, name: &str) -> Option<&[Option<String>]> {
        self.labels.get(name).map(Vec::as_slice)
    }

    /// New set holding the items at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> EmbeddingSet {
        EmbeddingSet {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: self
                .labels
                .iter()
                .map(|(k, v)| (k.clone(), indices.iter().map(|&i| v[i].clone()).collect()))
                .collect(),
        }
    }
}
