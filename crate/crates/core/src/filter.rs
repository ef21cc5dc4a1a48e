//! Threshold-calibrated domain filtering over classifier-scored documents:
//! keep/drop decisions, confusion counts and metric curves against gold
//! labels, seeded train/test splitting, and corpus statistics.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("threshold {0} outside [0, 1]")]
    TauOutOfRange(f64),
    #[error("document {id:?} has no gold label")]
    MissingLabel { id: String },
    #[error("document {id:?}: score {score} outside [0, 1]")]
    ScoreOutOfRange { id: String, score: f64 },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("cannot split an empty collection")]
    EmptySplit,
    #[error("test fraction {0} outside (0, 1)")]
    BadTestFraction(f64),
    #[error("taus list is empty")]
    EmptyTaus,
    #[error("{labels} labels for {docs} documents")]
    LabelLengthMismatch { labels: usize, docs: usize },
}

/// Binary domain label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Medical,
    Other,
}

/// One classifier-scored document. Interchange form is JSON lines:
/// `{"id": str, "text": str, "score": float, "label": "medical"|"other"}`
/// with `label` optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub id: String,
    pub text: String,
    /// Classifier probability that the document is in-domain.
    pub score: f64,
    #[serde(rename = "label", default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Label>,
}

/// Checks collection invariants: scores in [0, 1] and unique ids.
pub fn validate_documents(docs: &[ScoredDocument]) -> Result<(), FilterError> {
    let mut seen = std::collections::HashSet::with_capacity(docs.len());
    for doc in docs {
        if !(0.0..=1.0).contains(&doc.score) {
            return Err(FilterError::ScoreOutOfRange {
                id: doc.id.clone(),
                score: doc.score,
            });
        }
        if !seen.insert(doc.id.as_str()) {
            return Err(FilterError::DuplicateId(doc.id.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

/// Precision/recall family at one operating point. Any 0/0 ratio is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f_beta: f64,
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f_beta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub num_documents: u64,
    /// Maximal whitespace-delimited runs summed over all documents.
    pub num_words: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction_positive: Option<f64>,
}

/// Keeps documents whose score is at least `tau`, preserving input order.
/// The comparison is inclusive so that a threshold of 1.0 is attainable.
pub fn apply_threshold(
    docs: &[ScoredDocument],
    tau: f64,
) -> Result<Vec<&ScoredDocument>, FilterError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(FilterError::TauOutOfRange(tau));
    }
    Ok(docs.iter().filter(|d| d.score >= tau).collect())
}

/// Confusion counts of the threshold decision against gold labels, with
/// `Medical` as the positive class. Every document must carry a label.
pub fn confusion_at(docs: &[ScoredDocument], tau: f64) -> Result<ConfusionCounts, FilterError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(FilterError::TauOutOfRange(tau));
    }
    let mut counts = ConfusionCounts::default();
    for doc in docs {
        let gold = doc.gold_label.ok_or_else(|| FilterError::MissingLabel {
            id: doc.id.clone(),
        })?;
        let predicted_positive = doc.score >= tau;
        match (gold, predicted_positive) {
            (Label::Medical, true) => counts.true_positives += 1,
            (Label::Medical, false) => counts.false_negatives += 1,
            (Label::Other, true) => counts.false_positives += 1,
            (Label::Other, false) => counts.true_negatives += 1,
        }
    }
    Ok(counts)
}

/// Precision, recall, F1 and Fβ from confusion counts.
///
/// `f_beta = (1 + β²)·P·R / (β²·P + R)`; β < 1 weights precision more
/// heavily. `beta` must be positive.
pub fn precision_recall_f(counts: &ConfusionCounts, beta: f64) -> PrMetrics {
    assert!(beta > 0.0, "beta must be positive");
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(
        counts.true_positives,
        counts.true_positives + counts.false_positives,
    );
    let recall = ratio(
        counts.true_positives,
        counts.true_positives + counts.false_negatives,
    );
    PrMetrics {
        precision,
        recall,
        f1: f_score(precision, recall, 1.0),
        f_beta: f_score(precision, recall, beta),
    }
}

fn f_score(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Evaluates the metric family at each threshold, in the given order.
pub fn metric_curve(
    docs: &[ScoredDocument],
    taus: &[f64],
    beta: f64,
) -> Result<Vec<CurvePoint>, FilterError> {
    if taus.is_empty() {
        return Err(FilterError::EmptyTaus);
    }
    taus.iter()
        .map(|&tau| {
            let counts = confusion_at(docs, tau)?;
            let m = precision_recall_f(&counts, beta);
            Ok(CurvePoint {
                tau,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                f_beta: m.f_beta,
            })
        })
        .collect()
}

/// Splits items into `(train, test)` with a deterministic shuffle.
///
/// The shuffle is a top-down Fisher–Yates driven by ChaCha8 seeded with
/// `seed`, swapping index `i` with `next_u64() % (i + 1)` for `i` from
/// `n - 1` down to 1 — fixed here so partitions can be reproduced outside
/// this crate. The test side takes the first `round_half_even(f · n)`
/// shuffled items; both sides keep shuffle order.
pub fn split_dataset<T: Clone>(
    items: &[T],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), FilterError> {
    if items.is_empty() {
        return Err(FilterError::EmptySplit);
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(FilterError::BadTestFraction(test_fraction));
    }
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let n_test = (test_fraction * n as f64).round_ties_even() as usize;
    let test = order[..n_test].iter().map(|&i| items[i].clone()).collect();
    let train = order[n_test..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

/// Document and word totals, plus the positive fraction when parallel
/// labels are supplied.
pub fn corpus_stats(
    docs: &[ScoredDocument],
    labels: Option<&[Label]>,
) -> Result<CorpusStats, FilterError> {
    if let Some(labels) = labels {
        if labels.len() != docs.len() {
            return Err(FilterError::LabelLengthMismatch {
                labels: labels.len(),
                docs: docs.len(),
            });
        }
    }
    let num_words = docs
        .iter()
        .map(|d| d.text.split_whitespace().count() as u64)
        .sum();
    let fraction_positive = labels.filter(|_| !docs.is_empty()).map(|labels| {
        let positive = labels.iter().filter(|&&l| l == Label::Medical).count();
        positive as f64 / docs.len() as f64
    });
    Ok(CorpusStats {
        num_documents: docs.len() as u64,
        num_words,
        fraction_positive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, score: f64, gold: Option<Label>) -> ScoredDocument {
        ScoredDocument {
            id: id.to_string(),
            text: String::new(),
            score,
            gold_label: gold,
        }
    }

    fn labeled_fixture() -> Vec<ScoredDocument> {
        vec![
            doc("a", 0.95, Some(Label::Medical)),
            doc("b", 0.8, Some(Label::Medical)),
            doc("c", 0.6, Some(Label::Other)),
            doc("d", 0.3, Some(Label::Other)),
        ]
    }

    #[test]
    fn threshold_keeps_scores_at_or_above_tau() {
        let docs = vec![doc("a", 0.95, None), doc("b", 0.91, None), doc("c", 0.60, None)];
        let kept = apply_threshold(&docs, 0.9).unwrap();
        assert_eq!(kept.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(apply_threshold(&docs, 0.0).unwrap().len(), 3);
        assert_eq!(apply_threshold(&docs, 1.0).unwrap().len(), 0);
        assert!(apply_threshold(&docs, 1.5).is_err());
    }

    #[test]
    fn confusion_counts_by_hand() {
        let docs = labeled_fixture();
        let c = confusion_at(&docs, 0.7).unwrap();
        assert_eq!((c.true_positives, c.false_positives, c.false_negatives, c.true_negatives), (2, 0, 0, 2));
        let c = confusion_at(&docs, 0.5).unwrap();
        assert_eq!((c.true_positives, c.false_positives, c.false_negatives, c.true_negatives), (2, 1, 0, 1));
        let c = confusion_at(&[], 0.5).unwrap();
        assert_eq!(c.total(), 0);
    }

    #[test]
    fn confusion_requires_labels() {
        let docs = vec![doc("a", 0.9, None)];
        assert!(matches!(
            confusion_at(&docs, 0.5),
            Err(FilterError::MissingLabel { id }) if id == "a"
        ));
    }

    #[test]
    fn f_beta_at_the_calibrated_operating_point() {
        // 76/80 kept correct, 76/95 positives kept: P = 0.95, R = 0.80
        let counts = ConfusionCounts {
            true_positives: 76,
            false_positives: 4,
            false_negatives: 19,
            true_negatives: 1,
        };
        let m = precision_recall_f(&counts, 0.7);
        assert!((m.precision - 0.95).abs() < 1e-12);
        assert!((m.recall - 0.80).abs() < 1e-12);
        assert!((m.f_beta - 0.8948239).abs() < 1e-6, "got {}", m.f_beta);
    }

    #[test]
    fn f_beta_equals_precision_when_balanced() {
        for &x in &[0.0, 0.25, 0.7, 1.0] {
            for &beta in &[0.5, 0.7, 1.0, 2.0] {
                let f = f_score(x, x, beta);
                assert!((f - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_counts_give_zero_metrics() {
        let counts = ConfusionCounts {
            true_positives: 0,
            false_positives: 0,
            false_negatives: 3,
            true_negatives: 5,
        };
        let m = precision_recall_f(&counts, 0.7);
        assert_eq!((m.precision, m.recall, m.f_beta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn metric_curve_matches_composed_oracles() {
        let docs = labeled_fixture();
        let rows = metric_curve(&docs, &[0.5, 0.7], 0.7).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rows[0].recall, 1.0);
        assert!((rows[0].f1 - 0.8).abs() < 1e-12);
        assert_eq!((rows[1].precision, rows[1].recall, rows[1].f1, rows[1].f_beta), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn duplicate_taus_produce_duplicate_rows() {
        let docs = labeled_fixture();
        let rows = metric_curve(&docs, &[0.7, 0.7], 0.7).unwrap();
        assert_eq!(rows[0].precision, rows[1].precision);
        assert_eq!(rows[0].f_beta, rows[1].f_beta);
    }

    #[test]
    fn split_sizes_follow_rounding() {
        let items: Vec<u32> = (0..264_000).collect();
        let (train, test) = split_dataset(&items, 0.1, 7).unwrap();
        assert_eq!(test.len(), 26_400);
        assert_eq!(train.len(), 237_600);

        // round-half-even at n = 3, f = 0.5: 1.5 rounds to 2
        let (train, test) = split_dataset(&[1, 2, 3], 0.5, 7).unwrap();
        assert_eq!(test.len(), 2);
        assert_eq!(train.len(), 1);
    }

    #[test]
    fn split_is_deterministic() {
        let items: Vec<u32> = (0..100).collect();
        let a = split_dataset(&items, 0.1, 42).unwrap();
        let b = split_dataset(&items, 0.1, 42).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&items, 0.1, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(matches!(
            split_dataset::<u32>(&[], 0.1, 0),
            Err(FilterError::EmptySplit)
        ));
        assert!(matches!(
            split_dataset(&[1], 0.0, 0),
            Err(FilterError::BadTestFraction(_))
        ));
        assert!(matches!(
            split_dataset(&[1], 1.0, 0),
            Err(FilterError::BadTestFraction(_))
        ));
    }

    #[test]
    fn word_counts_are_whitespace_runs() {
        let docs = vec![
            ScoredDocument { id: "1".into(), text: "ein test".into(), score: 0.5, gold_label: None },
            ScoredDocument { id: "2".into(), text: "drei worte hier".into(), score: 0.5, gold_label: None },
        ];
        let stats = corpus_stats(&docs, None).unwrap();
        assert_eq!(stats.num_documents, 2);
        assert_eq!(stats.num_words, 5);
        assert_eq!(stats.fraction_positive, None);
    }

    #[test]
    fn fraction_positive_over_total() {
        let docs: Vec<ScoredDocument> = (0..10_000)
            .map(|i| ScoredDocument {
                id: i.to_string(),
                text: "x".into(),
                score: 0.5,
                gold_label: None,
            })
            .collect();
        let labels: Vec<Label> = (0..10_000)
            .map(|i| if i < 89 { Label::Medical } else { Label::Other })
            .collect();
        let stats = corpus_stats(&docs, Some(&labels)).unwrap();
        assert_eq!(stats.fraction_positive, Some(0.0089));
    }

    #[test]
    fn empty_collection_stats() {
        let stats = corpus_stats(&[], None).unwrap();
        assert_eq!(stats, CorpusStats { num_documents: 0, num_words: 0, fraction_positive: None });
    }

    #[test]
    fn validation_catches_bad_scores_and_duplicate_ids() {
        let docs = vec![doc("a", 1.2, None)];
        assert!(matches!(
            validate_documents(&docs),
            Err(FilterError::ScoreOutOfRange { .. })
        ));
        let docs = vec![doc("a", 0.5, None), doc("a", 0.6, None)];
        assert!(matches!(
            validate_documents(&docs),
            Err(FilterError::DuplicateId(_))
        ));
    }
}
