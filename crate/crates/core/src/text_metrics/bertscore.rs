use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::load_token_embeddings;
use crate::rng::{fnv1a64, splitmix64, SplitMix64};
use crate::types::Prf;

use super::TokenSequence;

/// Token embedding source for BERTScore.
///
/// `embed` returns one unit-norm vector per token, all of the same dimension,
/// and is deterministic for a fixed input.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> String;

    fn embed(&self, tokens: &TokenSequence) -> Result<Vec<Vec<f64>>>;

    /// Cosine similarities, `rows = candidate`, `columns = reference`.
    fn similarity(&self, candidate: &TokenSequence, reference: &TokenSequence) -> Result<Vec<Vec<f64>>> {
        let c = self.embed(candidate)?;
        let r = self.embed(reference)?;
        Ok(c.iter().map(|x| r.iter().map(|y| dot(x, y)).collect()).collect())
    }

    /// False if calls must not overlap; the corpus scorer then runs serially.
    fn concurrent(&self) -> bool {
        true
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = dot(&v, &v).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// Greedy max-cosine matching. Each token's best similarity is clamped to
/// `[0, 1]` so scores stay in the unit interval for any provider.
pub fn bert_score(candidate: &TokenSequence, reference: &TokenSequence, provider: &dyn EmbeddingProvider) -> Result<Prf> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::Metric("BERTScore is undefined for an empty sequence".into()));
    }
    let sim = provider.similarity(candidate, reference)?;
    let best = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max).clamp(0.0, 1.0);
    let precision = sim.iter().map(|row| best(&mut row.iter().copied())).sum::<f64>() / candidate.len() as f64;
    let recall = (0..reference.len())
        .map(|j| best(&mut sim.iter().map(|row| row[j])))
        .sum::<f64>()
        / reference.len() as f64;
    Ok(Prf::new(precision, recall))
}

/// Exact-match provider: similarity is 1 for equal tokens and 0 otherwise.
///
/// `embed` needs a vocabulary; `similarity` does not.
#[derive(Clone, Debug, Default)]
pub struct OneHotProvider {
    vocabulary: BTreeMap<String, usize>,
}

impl OneHotProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vocabulary<'a>(sequences: impl IntoIterator<Item = &'a TokenSequence>) -> Self {
        let mut vocabulary = BTreeMap::new();
        for seq in sequences {
            for t in seq.tokens() {
                let next = vocabulary.len();
                vocabulary.entry(t.clone()).or_insert(next);
            }
        }
        OneHotProvider { vocabulary }
    }
}

impl EmbeddingProvider for OneHotProvider {
    fn name(&self) -> String {
        "one_hot".into()
    }

    fn embed(&self, tokens: &TokenSequence) -> Result<Vec<Vec<f64>>> {
        tokens
            .tokens()
            .iter()
            .map(|t| {
                let i = *self
                    .vocabulary
                    .get(t)
                    .ok_or_else(|| Error::Metric(format!("token `{t}` not in one-hot vocabulary")))?;
                let mut v = vec![0.0; self.vocabulary.len()];
                v[i] = 1.0;
                Ok(v)
            })
            .collect()
    }

    fn similarity(&self, candidate: &TokenSequence, reference: &TokenSequence) -> Result<Vec<Vec<f64>>> {
        Ok(candidate
            .tokens()
            .iter()
            .map(|c| reference.tokens().iter().map(|r| f64::from(u8::from(c == r))).collect())
            .collect())
    }
}

/// Pseudo-random token vectors derived from `(seed, token)`.
///
/// Components are SplitMix64 draws shifted to `[-0.5, 0.5)`, then the vector
/// is normalized. Equal tokens always get equal vectors.
#[derive(Clone, Copy, Debug)]
pub struct HashedProvider {
    pub seed: u64,
    pub dim: usize,
}

impl HashedProvider {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(seed: u64) -> Self {
        HashedProvider { seed, dim: Self::DEFAULT_DIM }
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        let mut rng = SplitMix64::new(splitmix64(self.seed ^ fnv1a64(token.as_bytes())));
        loop {
            let raw: Vec<f64> = (0..self.dim).map(|_| rng.next_f64() - 0.5).collect();
            if let Some(v) = normalized(raw) {
                return v;
            }
        }
    }
}

impl EmbeddingProvider for HashedProvider {
    fn name(&self) -> String {
        format!("hashed:{}", self.seed)
    }

    fn embed(&self, tokens: &TokenSequence) -> Result<Vec<Vec<f64>>> {
        Ok(tokens.tokens().iter().map(|t| self.vector(t)).collect())
    }
}

/// Token vectors read from a JSONL file, normalized on load.
///
/// Tokens absent from the file use the `<unk>` vector if one exists.
#[derive(Clone, Debug)]
pub struct FileProvider {
    path: String,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl FileProvider {
    pub const UNKNOWN: &'static str = "<unk>";

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_vectors(path.display().to_string(), load_token_embeddings(path)?)
    }

    pub fn from_vectors(path: String, raw: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Metric(format!("{path}: no token vectors")));
        }
        let mut vectors = BTreeMap::new();
        for (token, v) in raw {
            let v = normalized(v).ok_or_else(|| Error::Embedding {
                id: token.clone(),
                message: "zero vector".into(),
            })?;
            vectors.insert(token, v);
        }
        Ok(FileProvider { path, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.values().next().map_or(0, Vec::len)
    }

    pub fn has_unknown(&self) -> bool {
        self.vectors.contains_key(Self::UNKNOWN)
    }
}

impl EmbeddingProvider for FileProvider {
    fn name(&self) -> String {
        format!("file:{}", self.path)
    }

    fn embed(&self, tokens: &TokenSequence) -> Result<Vec<Vec<f64>>> {
        tokens
            .tokens()
            .iter()
            .map(|t| {
                self.vectors
                    .get(t)
                    .or_else(|| self.vectors.get(Self::UNKNOWN))
                    .cloned()
                    .ok_or_else(|| Error::Metric(format!("token `{t}` has no vector and no `<unk>` fallback")))
            })
            .collect()
    }
}
