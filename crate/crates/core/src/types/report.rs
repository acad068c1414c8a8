use serde::{Deserialize, Serialize};

/// Precision, recall, and their harmonic mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Prf {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
        }
    }

    pub fn zero() -> Self {
        Prf {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        }
    }
}

/// `2pr / (p + r)`, or 0 when both are 0.
pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Scores for one caption pair. `None` marks a metric that was not requested
/// or could not be computed for this pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub image_id: String,
    pub bleu: Option<f64>,
    pub rouge_l_p: Option<f64>,
    pub rouge_l_r: Option<f64>,
    pub rouge_l_f: Option<f64>,
    pub bertscore_p: Option<f64>,
    pub bertscore_r: Option<f64>,
    pub bertscore_f: Option<f64>,
}

/// Arithmetic means of the per-pair scores over the pairs where each metric
/// is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusAggregate {
    pub n_pairs: usize,
    pub bleu: Option<f64>,
    pub rouge_l_p: Option<f64>,
    pub rouge_l_r: Option<f64>,
    pub rouge_l_f: Option<f64>,
    pub bertscore_p: Option<f64>,
    pub bertscore_r: Option<f64>,
    pub bertscore_f: Option<f64>,
    /// Pairs that contributed to the BERTScore means.
    pub n_bertscore: usize,
}

/// Caption-level metric fragment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionMetrics {
    pub per_pair: Vec<PairScores>,
    pub aggregate: CorpusAggregate,
}

/// Counts with truth in rows and predictions in columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(rows: Vec<String>, columns: Vec<String>) -> Self {
        let counts = vec![vec![0; columns.len()]; rows.len()];
        ConfusionMatrix {
            rows,
            columns,
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn column_sum(&self, column: usize) -> u64 {
        self.counts.iter().map(|r| r[column]).sum()
    }

    pub fn get(&self, row: &str, column: &str) -> Option<u64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.counts[r][c])
    }

    /// Sum of cells whose row label equals their column label.
    pub fn diagonal(&self) -> u64 {
        let mut sum = 0;
        for (r, label) in self.rows.iter().enumerate() {
            if let Some(c) = self.columns.iter().position(|x| x == label) {
                sum += self.counts[r][c];
            }
        }
        sum
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Evaluation of a classifier head on one labelled test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub task: String,
    pub head: String,
    pub n: u64,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}
