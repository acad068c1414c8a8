//! Nearest-class-mean classification under cosine similarity.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{harmonic_mean, ClassMetrics, ClassifierReport, ConfusionMatrix, EmbeddingSet};

pub const HEAD: &str = "nearest_class_mean_cosine";

/// Unit-norm prototype per class, keyed by class id.
pub type Prototypes = BTreeMap<String, Vec<f64>>;

fn labels<'a>(set: &'a EmbeddingSet, label: &str) -> Result<Vec<&'a str>> {
    let column = set
        .label(label)
        .ok_or_else(|| Error::Classifier(format!("no label `{label}` in embedding set")))?;
    column
        .iter()
        .zip(&set.ids)
        .map(|(v, id)| {
            v.as_deref().ok_or_else(|| Error::Embedding {
                id: id.clone(),
                message: format!("missing label `{label}`"),
            })
        })
        .collect()
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|x| x / norm).collect())
}

/// Stratified split. Classes are visited in sorted order and each gets
/// `round(test_fraction * n)` test items, clamped to `1..=n-1`, drawn by a
/// ChaCha8 shuffle seeded with `seed`. Both halves keep input order.
pub fn split(set: &EmbeddingSet, label: &str, test_fraction: f64, seed: u64) -> Result<(EmbeddingSet, EmbeddingSet)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Classifier(format!("test fraction {test_fraction} is not in (0, 1)")));
    }
    let labels = labels(set, label)?;
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; set.len()];
    for (class, mut members) in by_class {
        let n = members.len();
        if n < 2 {
            return Err(Error::Classifier(format!("class `{class}` has a single member and cannot be split")));
        }
        let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        members.shuffle(&mut rng);
        for &i in &members[..n_test] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..set.len()).partition(|&i| is_test[i]);
    Ok((set.subset(&train), set.subset(&test)))
}

/// Normalized mean of the normalized member vectors of each class.
pub fn fit_prototypes(train: &EmbeddingSet, label: &str) -> Result<Prototypes> {
    train.validate()?;
    let labels = labels(train, label)?;
    let mut sums: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for ((id, v), class) in train.ids.iter().zip(&train.vectors).zip(&labels) {
        let u = unit(v).ok_or_else(|| Error::Embedding { id: id.clone(), message: "zero-norm vector".into() })?;
        let sum = sums.entry(class).or_insert_with(|| vec![0.0; u.len()]);
        sum.iter_mut().zip(&u).for_each(|(s, x)| *s += x);
    }
    if sums.is_empty() {
        return Err(Error::Classifier("no training items".into()));
    }
    sums.into_iter()
        .map(|(class, sum)| {
            let p = unit(&sum).ok_or_else(|| {
                Error::Classifier(format!("members of class `{class}` cancel out; prototype is undefined"))
            })?;
            Ok((class.to_string(), p))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class: String,
    pub scores: BTreeMap<String, f64>,
}

/// Highest cosine wins; exact ties go to the smallest class id.
pub fn predict(vector: &[f64], prototypes: &Prototypes) -> Result<Prediction> {
    let q = unit(vector).ok_or_else(|| Error::Classifier("query vector has zero norm".into()))?;
    let mut scores = BTreeMap::new();
    let mut best: Option<(&String, f64)> = None;
    for (class, p) in prototypes {
        if p.len() != q.len() {
            return Err(Error::Classifier(format!(
                "query dimension {} does not match prototype dimension {}",
                q.len(),
                p.len()
            )));
        }
        let cos: f64 = q.iter().zip(p).map(|(a, b)| a * b).sum();
        // BTreeMap iteration is sorted, so strict `>` keeps the smallest id on ties.
        if best.map_or(true, |(_, s)| cos > s) {
            best = Some((class, cos));
        }
        scores.insert(class.clone(), cos);
    }
    let (class, _) = best.ok_or_else(|| Error::Classifier("no prototypes".into()))?;
    Ok(Prediction { class: class.clone(), scores })
}

/// Accuracy, per-class P/R/F1 (0 where undefined), support-weighted F1 and
/// the confusion matrix over the sorted union of observed classes.
pub fn classification_metrics<S: AsRef<str>>(truth: &[S], predicted: &[S]) -> Result<(f64, f64, Vec<ClassMetrics>, ConfusionMatrix)> {
    if truth.is_empty() {
        return Err(Error::Classifier("empty test set".into()));
    }
    if truth.len() != predicted.len() {
        return Err(Error::Classifier("truth and prediction lengths differ".into()));
    }
    let classes: Vec<String> = truth
        .iter()
        .chain(predicted)
        .map(|s| s.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut confusion = ConfusionMatrix::zeros(classes.clone(), classes.clone());
    for (t, p) in truth.iter().zip(predicted) {
        confusion.counts[index[t.as_ref()]][index[p.as_ref()]] += 1;
    }
    let n = truth.len() as u64;
    let mut per_class = Vec::new();
    let mut weighted_f1 = 0.0;
    for (i, class) in classes.iter().enumerate() {
        let tp = confusion.counts[i][i];
        let support = confusion.row_sum(i);
        let predicted_n = confusion.column_sum(i);
        let precision = if predicted_n == 0 { 0.0 } else { tp as f64 / predicted_n as f64 };
        let recall = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
        let f1 = harmonic_mean(precision, recall);
        weighted_f1 += support as f64 / n as f64 * f1;
        per_class.push(ClassMetrics { class: class.clone(), precision, recall, f1, support });
    }
    let accuracy = confusion.diagonal() as f64 / n as f64;
    Ok((accuracy, weighted_f1, per_class, confusion))
}

/// Predicts every test item (in parallel) and scores against `label`.
pub fn evaluate(test: &EmbeddingSet, prototypes: &Prototypes, label: &str) -> Result<ClassifierReport> {
    if test.is_empty() {
        return Err(Error::Classifier("empty test set".into()));
    }
    test.validate()?;
    let truth = labels(test, label)?;
    let predicted: Vec<String> = test
        .vectors
        .par_iter()
        .zip(&test.ids)
        .map(|(v, id)| {
            predict(v, prototypes).map(|p| p.class).map_err(|e| Error::Embedding { id: id.clone(), message: e.to_string() })
        })
        .collect::<Result<_>>()?;
    let predicted: Vec<&str> = predicted.iter().map(String::as_str).collect();
    let (accuracy, weighted_f1, per_class, confusion) = classification_metrics(&truth, &predicted)?;
    Ok(ClassifierReport {
        task: label.to_string(),
        head: HEAD.to_string(),
        n: test.len() as u64,
        accuracy,
        weighted_f1,
        per_class,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(points: &[(&str, &[f64], &str)]) -> EmbeddingSet {
        let ids = points.iter().map(|p| p.0.to_string()).collect();
        let vectors = points.iter().map(|p| p.1.to_vec()).collect();
        let mut labels = BTreeMap::new();
        labels.insert("diagnosis".to_string(), points.iter().map(|p| Some(p.2.to_string())).collect());
        EmbeddingSet::new(ids, vectors, labels).unwrap()
    }

    fn ten() -> EmbeddingSet {
        let names: Vec<String> = (0..10).map(|i| format!("id{i}")).collect();
        let pts: Vec<(&str, &[f64], &str)> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), if i % 2 == 0 { &[1.0, 0.0][..] } else { &[0.0, 1.0][..] }, if i % 2 == 0 { "A" } else { "B" }))
            .collect();
        set(&pts)
    }

    #[test]
    fn stratified_split() {
        let s = ten();
        let (train, test) = split(&s, "diagnosis", 0.2, 3).unwrap();
        assert_eq!(test.len(), 2);
        assert_eq!(train.len(), 8);
        let t = test.label("diagnosis").unwrap();
        assert!(t.contains(&Some("A".into())) && t.contains(&Some("B".into())));
        let mut all: Vec<String> = train.ids.iter().chain(&test.ids).cloned().collect();
        all.sort();
        let mut expected = s.ids.clone();
        expected.sort();
        assert_eq!(all, expected);
        assert_eq!(split(&s, "diagnosis", 0.2, 3).unwrap().1.ids, test.ids);
        let differs = (4..20).any(|seed| split(&s, "diagnosis", 0.2, seed).unwrap().1.ids != test.ids);
        assert!(differs);
    }

    #[test]
    fn singleton_class_rejected() {
        let s = set(&[("a", &[1.0], "A"), ("b", &[1.0], "A"), ("c", &[1.0], "Z")]);
        let err = split(&s, "diagnosis", 0.5, 0).unwrap_err();
        assert!(err.to_string().contains("`Z`"));
    }

    #[test]
    fn prototypes() {
        let s = set(&[("a", &[1.0, 0.0], "A"), ("b", &[0.0, 1.0], "A"), ("c", &[0.0, 5.0], "B")]);
        let p = fit_prototypes(&s, "diagnosis").unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((p["A"][0] - h).abs() < 1e-15 && (p["A"][1] - h).abs() < 1e-15);
        assert_eq!(p["B"], vec![0.0, 1.0]);
        let zero = set(&[("z", &[0.0, 0.0], "A")]);
        assert!(fit_prototypes(&zero, "diagnosis").unwrap_err().to_string().contains("z"));
    }

    #[test]
    fn prediction_and_ties() {
        let mut p = Prototypes::new();
        p.insert("e1".into(), vec![1.0, 0.0]);
        p.insert("e2".into(), vec![0.0, 1.0]);
        assert_eq!(predict(&[0.9, 0.1], &p).unwrap().class, "e1");
        let exact = predict(&[0.0, 1.0], &p).unwrap();
        assert_eq!((exact.class.as_str(), exact.scores["e2"]), ("e2", 1.0));
        assert_eq!(predict(&[1.0, 1.0], &p).unwrap().class, "e1");
        assert!(predict(&[0.0, 0.0], &p).is_err());
        assert!(predict(&[1.0, 0.0, 0.0], &p).is_err());
    }

    #[test]
    fn weighted_f1_fixture() {
        let (acc, wf1, per_class, m) = classification_metrics(&["A", "A", "B"], &["A", "B", "B"]).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
        assert!((wf1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((per_class[0].precision, per_class[0].recall), (1.0, 0.5));
        assert_eq!((per_class[1].precision, per_class[1].recall), (0.5, 1.0));
        assert_eq!(m.total(), 3);
        assert!(classification_metrics::<&str>(&[], &[]).is_err());
    }

    #[test]
    fn evaluate_perfect() {
        let s = ten();
        let p = fit_prototypes(&s, "diagnosis").unwrap();
        let r = evaluate(&s, &p, "diagnosis").unwrap();
        assert_eq!((r.accuracy, r.weighted_f1, r.n), (1.0, 1.0, 10));
        assert_eq!(r.head, HEAD);
        assert_eq!(r.confusion.total(), 10);
    }

    proptest! {
        #[test]
        fn scale_invariant(v in prop::collection::vec(-10.0f64..10.0, 3), alpha in 0.01f64..100.0) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
            let mut p = Prototypes::new();
            p.insert("a".into(), unit(&[1.0, 2.0, 0.5]).unwrap());
            p.insert("b".into(), unit(&[-1.0, 0.0, 3.0]).unwrap());
            p.insert("c".into(), unit(&[0.0, -1.0, -1.0]).unwrap());
            let base = predict(&v, &p).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * alpha).collect();
            let other = predict(&scaled, &p).unwrap();
            prop_assert_eq!(&base.class, &other.class);
            for (k, s) in &base.scores {
                prop_assert!((s - other.scores[k]).abs() < 1e-12);
            }
        }
    }
}
