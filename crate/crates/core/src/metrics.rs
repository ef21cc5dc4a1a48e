//! Evaluation arithmetic: benchmark accuracy with standard errors,
//! cross-benchmark aggregation, pairwise win-rate matrices, failure-mode
//! counting, free-marginal kappa, and annotator validation.
//!
//! Everything is computed in f64; rounding to report precision happens only
//! at the output boundary.

use crate::gateway::FailureModeRecord;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("correct {correct} exceeds n {n}")]
    InvalidCounts { correct: u64, n: u64 },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(u64),
    #[error("no benchmark results to aggregate")]
    EmptyResults,
    #[error("verdict compares {0:?} with itself")]
    SelfComparison(String),
    #[error("rating table has no items")]
    EmptyTable,
    #[error("need at least 2 raters, got {0}")]
    TooFewRaters(usize),
    #[error("need at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("item {item} has {got} ratings, expected {want}")]
    RaggedTable { item: usize, got: usize, want: usize },
    #[error("item {item} rating {rating} outside 0..{categories}")]
    CategoryOutOfRange {
        item: usize,
        rating: u32,
        categories: usize,
    },
    #[error("label vectors differ in length: {left} vs {right}")]
    LabelLengthMismatch { left: usize, right: usize },
    #[error("no annotators supplied")]
    NoAnnotators,
}

/// One benchmark outcome with its binomial standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkResult {
    pub name: String,
    pub correct: u64,
    pub n: u64,
    pub accuracy: f64,
    pub se: f64,
}

impl BenchmarkResult {
    pub fn from_counts(name: impl Into<String>, correct: u64, n: u64) -> Result<Self, MetricsError> {
        let (accuracy, se) = accuracy_se(correct, n)?;
        Ok(BenchmarkResult {
            name: name.into(),
            correct,
            n,
            accuracy,
            se,
        })
    }
}

/// Accuracy `correct / n` and its standard error
/// `sqrt(acc * (1 - acc) / (n - 1))`, with the sample-variance denominator.
/// The variance term is evaluated as `correct * (n - correct) / (n^2 (n-1))`
/// so the error is exactly symmetric under `correct -> n - correct`.
pub fn accuracy_se(correct: u64, n: u64) -> Result<(f64, f64), MetricsError> {
    if n < 2 {
        return Err(MetricsError::TooFewSamples(n));
    }
    if correct > n {
        return Err(MetricsError::InvalidCounts { correct, n });
    }
    let accuracy = correct as f64 / n as f64;
    let nf = n as f64;
    let product = correct as f64 * (n - correct) as f64;
    let se = (product / (nf * nf * (nf - 1.0))).sqrt();
    Ok((accuracy, se))
}

/// Unweighted mean of accuracies, and the standard error of that mean for
/// independent estimates: `sqrt(sum(se_i^2)) / k`, the square root of the
/// mean variance divided by sqrt(k).
pub fn aggregate_benchmarks(results: &[BenchmarkResult]) -> Result<(f64, f64), MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyResults);
    }
    let k = results.len() as f64;
    let avg_accuracy = results.iter().map(|r| r.accuracy).sum::<f64>() / k;
    let sum_var = results.iter().map(|r| r.se * r.se).sum::<f64>();
    Ok((avg_accuracy, sum_var.sqrt() / k))
}

/// Which side of a pairwise comparison won.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairOutcome {
    FirstWins,
    SecondWins,
    Tie,
}

/// One aggregated comparison between two named models.
#[derive(Debug, Clone)]
pub struct PairVerdict {
    pub first: String,
    pub second: String,
    pub outcome: PairOutcome,
}

/// Pairwise win/tie/total counts over a model set. `rate(i, j)` is the
/// win-rate of model `i` over model `j` with ties in the denominator but
/// neither numerator, so `rate(i, j) + rate(j, i) + tie_rate(i, j) = 1`
/// for every compared pair.
#[derive(Debug, Clone, Serialize)]
pub struct WinRateMatrix {
    pub models: Vec<String>,
    pub wins: Vec<Vec<u64>>,
    pub ties: Vec<Vec<u64>>,
    pub totals: Vec<Vec<u64>>,
}

impl WinRateMatrix {
    pub fn index_of(&self, model: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    /// Win-rate of row `i` over column `j`; `None` on the diagonal and for
    /// pairs never compared.
    pub fn rate(&self, i: usize, j: usize) -> Option<f64> {
        if i == j || self.totals[i][j] == 0 {
            None
        } else {
            Some(self.wins[i][j] as f64 / self.totals[i][j] as f64)
        }
    }

    pub fn tie_rate(&self, i: usize, j: usize) -> Option<f64> {
        if i == j || self.totals[i][j] == 0 {
            None
        } else {
            Some(self.ties[i][j] as f64 / self.totals[i][j] as f64)
        }
    }

    /// Dense rate matrix with `None` where no comparison exists.
    pub fn rates(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.models.len())
            .map(|i| (0..self.models.len()).map(|j| self.rate(i, j)).collect())
            .collect()
    }
}

/// Tallies verdicts into a win-rate matrix. Models are ordered by first
/// appearance; a verdict naming the same model on both sides is an error.
pub fn win_rate_matrix(verdicts: &[PairVerdict]) -> Result<WinRateMatrix, MetricsError> {
    let mut models: Vec<String> = Vec::new();
    let mut index = BTreeMap::new();
    let mut intern = |name: &str, models: &mut Vec<String>| -> usize {
        *index.entry(name.to_string()).or_insert_with(|| {
            models.push(name.to_string());
            models.len() - 1
        })
    };

    let mut pairs = Vec::with_capacity(verdicts.len());
    for verdict in verdicts {
        if verdict.first == verdict.second {
            return Err(MetricsError::SelfComparison(verdict.first.clone()));
        }
        let i = intern(&verdict.first, &mut models);
        let j = intern(&verdict.second, &mut models);
        pairs.push((i, j, verdict.outcome));
    }

    let n = models.len();
    let mut matrix = WinRateMatrix {
        models,
        wins: vec![vec![0; n]; n],
        ties: vec![vec![0; n]; n],
        totals: vec![vec![0; n]; n],
    };
    for (i, j, outcome) in pairs {
        matrix.totals[i][j] += 1;
        matrix.totals[j][i] += 1;
        match outcome {
            PairOutcome::FirstWins => matrix.wins[i][j] += 1,
            PairOutcome::SecondWins => matrix.wins[j][i] += 1,
            PairOutcome::Tie => {
                matrix.ties[i][j] += 1;
                matrix.ties[j][i] += 1;
            }
        }
    }
    Ok(matrix)
}

/// Failure-mode tallies for one model.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ModelFailureCounts {
    /// Audited instances for this model.
    pub total: u64,
    /// Mode name to number of instances flagging it.
    pub counts: BTreeMap<&'static str, u64>,
}

/// Counts flagged failure modes per model.
pub fn failure_counts(
    records: &[(String, FailureModeRecord)],
) -> BTreeMap<String, ModelFailureCounts> {
    let mut per_model: BTreeMap<String, ModelFailureCounts> = BTreeMap::new();
    for (model, record) in records {
        let entry = per_model.entry(model.clone()).or_default();
        entry.total += 1;
        for (mode, flagged) in record.iter() {
            let slot = entry.counts.entry(mode).or_insert(0);
            if flagged {
                *slot += 1;
            }
        }
    }
    per_model
}

/// Items-by-raters table of categorical labels (0-based category indices).
#[derive(Debug, Clone)]
pub struct RatingTable {
    ratings: Vec<Vec<u32>>,
    num_categories: usize,
}

impl RatingTable {
    pub fn new(ratings: Vec<Vec<u32>>, num_categories: usize) -> Result<Self, MetricsError> {
        if ratings.is_empty() {
            return Err(MetricsError::EmptyTable);
        }
        if num_categories < 2 {
            return Err(MetricsError::TooFewCategories(num_categories));
        }
        let raters = ratings[0].len();
        if raters < 2 {
            return Err(MetricsError::TooFewRaters(raters));
        }
        for (item, row) in ratings.iter().enumerate() {
            if row.len() != raters {
                return Err(MetricsError::RaggedTable {
                    item,
                    got: row.len(),
                    want: raters,
                });
            }
            for &rating in row {
                if rating as usize >= num_categories {
                    return Err(MetricsError::CategoryOutOfRange {
                        item,
                        rating,
                        categories: num_categories,
                    });
                }
            }
        }
        Ok(RatingTable {
            ratings,
            num_categories,
        })
    }

    pub fn items(&self) -> usize {
        self.ratings.len()
    }

    pub fn raters(&self) -> usize {
        self.ratings[0].len()
    }

    pub fn categories(&self) -> usize {
        self.num_categories
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.ratings
    }
}

/// Free-marginal multi-rater kappa.
///
/// Observed agreement is the mean over items of the fraction of agreeing
/// rater pairs, computed from per-category counts as
/// `sum_c n_c * (n_c - 1) / (r * (r - 1))`; chance agreement is `1 / k`,
/// giving `kappa = (Po - 1/k) / (1 - 1/k)` in `[-1/(k-1), 1]`.
pub fn randolph_kappa(table: &RatingTable) -> Result<f64, MetricsError> {
    let raters = table.raters();
    let k = table.categories() as f64;
    let pair_total = (raters * (raters - 1)) as f64;

    let mut observed = 0.0;
    for row in table.rows() {
        let mut counts = vec![0u64; table.categories()];
        for &rating in row {
            counts[rating as usize] += 1;
        }
        let agreeing: u64 = counts.iter().map(|&c| c * c.saturating_sub(1)).sum();
        observed += agreeing as f64 / pair_total;
    }
    let observed = observed / table.items() as f64;
    Ok((observed - 1.0 / k) / (1.0 - 1.0 / k))
}

/// Mean and population standard deviation of one metric across annotators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub spread: f64,
}

/// Validation of predicted binary labels against several annotators.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub accuracy: MetricSummary,
}

/// Scores `predicted` against each annotator in turn (annotator as ground
/// truth, `true` as the positive class) and summarizes each metric as
/// mean ± population standard deviation across annotators. Any 0/0 ratio
/// is 0.
pub fn annotator_validation(
    predicted: &[bool],
    annotators: &[Vec<bool>],
) -> Result<ValidationSummary, MetricsError> {
    if annotators.is_empty() {
        return Err(MetricsError::NoAnnotators);
    }
    for gold in annotators {
        if gold.len() != predicted.len() {
            return Err(MetricsError::LabelLengthMismatch {
                left: predicted.len(),
                right: gold.len(),
            });
        }
    }

    let mut precision = Vec::new();
    let mut recall = Vec::new();
    let mut f1 = Vec::new();
    let mut accuracy = Vec::new();
    for gold in annotators {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        let mut tn = 0u64;
        for (&p, &g) in predicted.iter().zip(gold) {
            match (p, g) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        precision.push(p);
        recall.push(r);
        f1.push(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) });
        accuracy.push(ratio(tp + tn, tp + fp + fn_ + tn));
    }

    Ok(ValidationSummary {
        precision: summarize(&precision),
        recall: summarize(&recall),
        f1: summarize(&f1),
        accuracy: summarize(&accuracy),
    })
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MetricSummary {
        mean,
        spread: variance.sqrt(),
    }
}
