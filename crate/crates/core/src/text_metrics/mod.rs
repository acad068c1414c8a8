//! Caption-level text metrics: BLEU, ROUGE-L and BERTScore.
//!
//! All metrics are sentence-level against a single reference; corpus scores
//! are arithmetic means of the per-pair values.

mod bertscore;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::extract::normalize;
use crate::types::{CaptionMetrics, CaptionPair, CorpusAggregate, PairScores, Prf};

pub use bertscore::{bert_score, EmbeddingProvider, FileProvider, HashedProvider, OneHotProvider};

/// Normalized word tokens. Built only by [`tokenize`], so no token is empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Tokenizes the words joined by spaces.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let joined: Vec<&str> = words.iter().map(AsRef::as_ref).collect();
        tokenize(&joined.join(" "))
    }
}

pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence(
        normalize(text)
            .text
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    /// Zero n-gram precisions become `1 / (2 * candidate n-gram count)`.
    #[default]
    Epsilon,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU with uniform weights over orders `1..=max_n`.
///
/// Clipped n-gram precisions are combined by geometric mean and scaled by
/// the brevity penalty `exp(min(0, 1 - |ref| / |cand|))`. The score is 0 for
/// an empty candidate or reference, and whenever the candidate is shorter
/// than `max_n` (some order has no n-grams to score).
pub fn bleu(candidate: &TokenSequence, reference: &TokenSequence, max_n: usize, smoothing: Smoothing) -> f64 {
    assert!(max_n >= 1, "max_n must be at least 1");
    let (cand, refr) = (candidate.tokens(), reference.tokens());
    if cand.is_empty() || refr.is_empty() || cand.len() < max_n {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let total = cand.len() + 1 - n;
        let ref_counts = ngram_counts(refr, n);
        let clipped: usize = ngram_counts(cand, n)
            .into_iter()
            .map(|(gram, c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = match (clipped, smoothing) {
            (0, Smoothing::None) => return 0.0,
            (0, Smoothing::Epsilon) => 1.0 / (2.0 * total as f64),
            (c, _) => c as f64 / total as f64,
        };
        log_sum += precision.ln();
    }
    let brevity = (1.0 - refr.len() as f64 / cand.len() as f64).min(0.0).exp();
    brevity * (log_sum / max_n as f64).exp()
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L precision `L/|cand|`, recall `L/|ref|` and F1 (beta = 1).
pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> Prf {
    if candidate.is_empty() || reference.is_empty() {
        return Prf::zero();
    }
    let l = lcs_len(candidate.tokens(), reference.tokens()) as f64;
    Prf::new(l / candidate.len() as f64, l / reference.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSet {
    pub bleu: bool,
    pub rouge_l: bool,
    pub bertscore: bool,
}

impl MetricSet {
    pub fn all() -> Self {
        MetricSet {
            bleu: true,
            rouge_l: true,
            bertscore: true,
        }
    }

    /// Parses a comma list such as `bleu,rougeL,bertscore`.
    pub fn parse(list: &str) -> Result<Self, String> {
        let mut set = MetricSet {
            bleu: false,
            rouge_l: false,
            bertscore: false,
        };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.to_ascii_lowercase().as_str() {
                "bleu" => set.bleu = true,
                "rougel" | "rouge_l" | "rouge-l" => set.rouge_l = true,
                "bertscore" => set.bertscore = true,
                other => return Err(format!("unknown metric `{other}`")),
            }
        }
        Ok(set)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub metrics: MetricSet,
    pub bleu_max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            metrics: MetricSet::all(),
            bleu_max_n: 4,
            smoothing: Smoothing::Epsilon,
        }
    }
}

fn score_pair(pair: &CaptionPair, provider: Option<&dyn EmbeddingProvider>, options: &EvalOptions) -> PairScores {
    let cand = tokenize(&pair.candidate);
    let refr = tokenize(&pair.reference);
    let m = options.metrics;
    let rouge = m.rouge_l.then(|| rouge_l(&cand, &refr));
    let bert = match provider {
        Some(p) if m.bertscore => bert_score(&cand, &refr, p).ok(),
        _ => None,
    };
    PairScores {
        image_id: pair.image_id.clone(),
        bleu: m.bleu.then(|| bleu(&cand, &refr, options.bleu_max_n, options.smoothing)),
        rouge_l_p: rouge.map(|r| r.precision),
        rouge_l_r: rouge.map(|r| r.recall),
        rouge_l_f: rouge.map(|r| r.f1),
        bertscore_p: bert.map(|b| b.precision),
        bertscore_r: bert.map(|b| b.recall),
        bertscore_f: bert.map(|b| b.f1),
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        n += 1;
    }
    ((n > 0).then(|| sum / n as f64), n)
}

/// Means over the pairs where each metric is defined, summed in input order.
pub fn aggregate(per_pair: &[PairScores]) -> CorpusAggregate {
    let col = |f: fn(&PairScores) -> Option<f64>| mean(per_pair.iter().map(f)).0;
    CorpusAggregate {
        n_pairs: per_pair.len(),
        bleu: col(|p| p.bleu),
        rouge_l_p: col(|p| p.rouge_l_p),
        rouge_l_r: col(|p| p.rouge_l_r),
        rouge_l_f: col(|p| p.rouge_l_f),
        bertscore_p: col(|p| p.bertscore_p),
        bertscore_r: col(|p| p.bertscore_r),
        bertscore_f: col(|p| p.bertscore_f),
        n_bertscore: mean(per_pair.iter().map(|p| p.bertscore_f)).1,
    }
}

/// Scores every pair (in parallel unless the provider is single-threaded)
/// and aggregates. Pairs where BERTScore is undefined get `None` for it.
pub fn corpus_scores(
    pairs: &[CaptionPair],
    provider: Option<&dyn EmbeddingProvider>,
    options: &EvalOptions,
) -> CaptionMetrics {
    let per_pair: Vec<PairScores> = if provider.is_some_and(|p| !p.concurrent()) {
        pairs.iter().map(|p| score_pair(p, provider, options)).collect()
    } else {
        pairs.par_iter().map(|p| score_pair(p, provider, options)).collect()
    };
    let aggregate = aggregate(&per_pair);
    CaptionMetrics { per_pair, aggregate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(words: &[&str]) -> TokenSequence {
        TokenSequence::from_words(words)
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Large cell with coarse chromatin.").tokens(),
            ["large", "cell", "with", "coarse", "chromatin"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("CLL, CLL").tokens(), ["cll", "cll"]);
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        let x = seq(&["a", "small", "round", "cell", "here"]);
        assert_eq!(bleu(&x, &x, 4, Smoothing::None), 1.0);
        assert_eq!(bleu(&x, &x, 4, Smoothing::Epsilon), 1.0);
        let y = seq(&["totally", "different", "words", "now"]);
        assert_eq!(bleu(&x, &y, 4, Smoothing::None), 0.0);
        assert_eq!(bleu(&TokenSequence::default(), &x, 1, Smoothing::Epsilon), 0.0);
    }

    #[test]
    fn bleu_brevity_fixture() {
        let cand = seq(&["large", "cell", "coarse", "chromatin"]);
        let refr = seq(&["large", "cell", "with", "coarse", "chromatin"]);
        let expected = (-0.25f64).exp() * (2.0f64 / 3.0).sqrt();
        let got = bleu(&cand, &refr, 2, Smoothing::None);
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.6359).abs() < 1e-4);
    }

    #[test]
    fn bleu_epsilon_smoothing() {
        // unigram 2/3, no shared bigram: p2 = 1 / (2 * 2).
        let cand = seq(&["a", "b", "c"]);
        let refr = seq(&["b", "x", "a"]);
        let expected = ((2.0f64 / 3.0).ln() / 2.0 + (0.25f64).ln() / 2.0).exp();
        assert!((bleu(&cand, &refr, 2, Smoothing::Epsilon) - expected).abs() < 1e-12);
        assert_eq!(bleu(&cand, &refr, 2, Smoothing::None), 0.0);
    }

    #[test]
    fn rouge_fixture() {
        let r = rouge_l(&seq(&["large", "blast", "cell"]), &seq(&["large", "leukemic", "blast", "cell"]));
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 0.75);
        assert!((r.f1 - 6.0 / 7.0).abs() < 1e-12);
        let x = seq(&["a", "b"]);
        assert_eq!(rouge_l(&x, &x), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(rouge_l(&x, &seq(&["c"])), Prf::zero());
        assert_eq!(rouge_l(&TokenSequence::default(), &x), Prf::zero());
    }

    #[test]
    fn metric_list_parsing() {
        let m = MetricSet::parse("bleu,rougeL").unwrap();
        assert!(m.bleu && m.rouge_l && !m.bertscore);
        assert!(MetricSet::parse("meteor").is_err());
    }

    #[test]
    fn corpus_means() {
        let pairs = vec![
            CaptionPair { image_id: "a".into(), reference: "w x y z".into(), candidate: "w x y z".into() },
            CaptionPair { image_id: "b".into(), reference: "w x y z".into(), candidate: "p q r s".into() },
        ];
        let options = EvalOptions {
            metrics: MetricSet { bleu: true, rouge_l: true, bertscore: false },
            bleu_max_n: 4,
            smoothing: Smoothing::None,
        };
        let m = corpus_scores(&pairs, None, &options);
        assert_eq!(m.per_pair[0].bleu, Some(1.0));
        assert_eq!(m.per_pair[1].bleu, Some(0.0));
        assert_eq!(m.aggregate.bleu, Some(0.5));
        assert_eq!(m.aggregate.bertscore_f, None);
        let one = corpus_scores(&pairs[..1], None, &options);
        assert_eq!(one.aggregate.rouge_l_f, one.per_pair[0].rouge_l_f);
    }

    fn words() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(String::from), 0..10)
    }

    proptest! {
        #[test]
        fn rouge_f1_symmetric(a in words(), b in words()) {
            let (x, y) = (TokenSequence::from_words(&a), TokenSequence::from_words(&b));
            let xy = rouge_l(&x, &y);
            let yx = rouge_l(&y, &x);
            prop_assert_eq!(xy.precision, yx.recall);
            prop_assert_eq!(xy.recall, yx.precision);
            prop_assert!((xy.f1 - yx.f1).abs() < 1e-15);
        }

        #[test]
        fn scores_bounded(a in words(), b in words(), n in 1usize..5) {
            let (x, y) = (TokenSequence::from_words(&a), TokenSequence::from_words(&b));
            for s in [Smoothing::None, Smoothing::Epsilon] {
                let v = bleu(&x, &y, n, s);
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let r = rouge_l(&x, &y);
            prop_assert!((0.0..=1.0).contains(&r.f1));
            if x.len() >= n {
                prop_assert!((bleu(&x, &x, n, Smoothing::None) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn deleting_a_token_never_raises_recall(a in words(), b in words(), idx in 0usize..10) {
            let (x, y) = (TokenSequence::from_words(&a), TokenSequence::from_words(&b));
            prop_assume!(!x.is_empty());
            let mut shorter = a.clone();
            shorter.remove(idx % a.len());
            let before = rouge_l(&x, &y).recall;
            let after = rouge_l(&TokenSequence::from_words(&shorter), &y).recall;
            prop_assert!(after <= before);
        }
    }
}
