//! Classification and ranking metrics, relative comparison measures, and the
//! paired one-tailed t-test used to compare system runs.

use std::collections::BTreeSet;

use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::corpus::LabelSet;

/// Errors from metric preconditions.
#[derive(Debug, Error)]
pub enum EvalError {
    /// Paired inputs must have equal lengths.
    #[error("paired inputs differ in length: {left} vs {right}")]
    LengthMismatch {
        /// Length of the first sequence.
        left: usize,
        /// Length of the second sequence.
        right: usize,
    },
    /// Macro-averaging needs at least one reference label.
    #[error("no reference labels; macro-averaged F1 is undefined")]
    NoReferenceLabels,
    /// A ranking or judgment listed the same label twice.
    #[error("duplicate label {label} in {what}")]
    DuplicateLabel {
        /// The repeated label id.
        label: u32,
        /// Which input contained it.
        what: &'static str,
    },
    /// A relative measure's denominator is not positive.
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),
    /// The t-test needs at least two pairs.
    #[error("need at least 2 paired observations, got {0}")]
    TooFewPairs(usize),
    /// The t-statistic is undefined for a constant nonzero difference.
    #[error("paired differences have zero variance but nonzero mean")]
    ZeroVariance,
    /// Mean aggregation over an empty query set.
    #[error("no queries to aggregate")]
    NoQueries,
}

/// One query's ranked labels plus its relevance judgments.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedJudgment {
    ranking: Vec<u32>,
    /// `(label, grade)` sorted by label; absent labels have grade 0.
    grades: Vec<(u32, f64)>,
}

impl RankedJudgment {
    /// Pairs a ranking (best first) with graded judgments. Both inputs must
    /// mention each label at most once.
    pub fn new(ranking: Vec<u32>, mut grades: Vec<(u32, f64)>) -> Result<Self, EvalError> {
        let mut seen = BTreeSet::new();
        for &label in &ranking {
            if !seen.insert(label) {
                return Err(EvalError::DuplicateLabel {
                    label,
                    what: "ranking",
                });
            }
        }
        grades.sort_unstable_by_key(|&(label, _)| label);
        for pair in grades.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(EvalError::DuplicateLabel {
                    label: pair[0].0,
                    what: "judgments",
                });
            }
        }
        Ok(Self { ranking, grades })
    }

    /// The ranked label ids, best first.
    pub fn ranking(&self) -> &[u32] {
        &self.ranking
    }

    /// The relevance grade of a label (0 when unjudged).
    pub fn grade(&self, label: u32) -> f64 {
        self.grades
            .binary_search_by_key(&label, |&(l, _)| l)
            .map(|i| self.grades[i].1)
            .unwrap_or(0.0)
    }

    /// Number of judged labels with a positive grade.
    pub fn num_relevant(&self) -> usize {
        self.grades.iter().filter(|&&(_, g)| g > 0.0).count()
    }
}

fn f1(tp: f64, predicted: f64, referenced: f64) -> f64 {
    if tp == 0.0 {
        return 0.0;
    }
    2.0 * tp / (predicted + referenced)
}

/// Micro-averaged F1: true positives, predicted positives and reference
/// positives are pooled over all documents before the harmonic mean. For
/// single-label data this equals plain accuracy.
pub fn micro_f1(predictions: &[LabelSet], references: &[LabelSet]) -> Result<f64, EvalError> {
    if predictions.len() != references.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: references.len(),
        });
    }
    let mut tp = 0.0;
    let mut predicted = 0.0;
    let mut referenced = 0.0;
    for (pred, reference) in predictions.iter().zip(references) {
        predicted += pred.len() as f64;
        referenced += reference.len() as f64;
        tp += pred.iter().filter(|&l| reference.contains(l)).count() as f64;
    }
    Ok(f1(tp, predicted, referenced))
}

/// Macro-averaged F1: per-label F1 scores averaged over the labels present
/// in the references. Labels the system invents do not enter the average;
/// a label with no true positives scores 0.
pub fn macro_f1(predictions: &[LabelSet], references: &[LabelSet]) -> Result<f64, EvalError> {
    if predictions.len() != references.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: references.len(),
        });
    }
    let labels: BTreeSet<u32> = references.iter().flat_map(LabelSet::iter).collect();
    if labels.is_empty() {
        return Err(EvalError::NoReferenceLabels);
    }
    let mut total = 0.0;
    for &label in &labels {
        let mut tp = 0.0;
        let mut predicted = 0.0;
        let mut referenced = 0.0;
        for (pred, reference) in predictions.iter().zip(references) {
            let p = pred.contains(label);
            let r = reference.contains(label);
            predicted += p as u32 as f64;
            referenced += r as u32 as f64;
            tp += (p && r) as u32 as f64;
        }
        total += f1(tp, predicted, referenced);
    }
    Ok(total / labels.len() as f64)
}

/// Average precision of one ranking, judgments binarized at grade > 0.
///
/// The recall base is the number of relevant judged labels, whether or not
/// they appear in the ranking; a query with no relevant labels scores 0 (and
/// still counts toward a mean).
pub fn average_precision(rj: &RankedJudgment) -> f64 {
    let relevant = rj.num_relevant();
    if relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &label) in rj.ranking.iter().enumerate() {
        if rj.grade(label) > 0.0 {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    sum / relevant as f64
}

/// Mean average precision over a set of queries.
pub fn mean_average_precision(queries: &[RankedJudgment]) -> Result<f64, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    Ok(queries.iter().map(average_precision).sum::<f64>() / queries.len() as f64)
}

/// The rank cutoff used when none is specified.
pub const DEFAULT_NDCG_K: usize = 20;

fn dcg(grades: impl Iterator<Item = f64>) -> f64 {
    grades
        .enumerate()
        .map(|(pos, g)| (2f64.powf(g) - 1.0) / ((pos + 2) as f64).log2())
        .sum()
}

/// Normalized discounted cumulative gain at cutoff `k`, with exponential
/// gain `2^grade - 1`. A query with no positive grades scores 0.
pub fn ndcg_at_k(rj: &RankedJudgment, k: usize) -> f64 {
    let mut ideal: Vec<f64> = rj
        .grades
        .iter()
        .map(|&(_, g)| g)
        .filter(|&g| g > 0.0)
        .collect();
    if ideal.is_empty() {
        return 0.0;
    }
    ideal.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    ideal.truncate(k);
    let idcg = dcg(ideal.into_iter());
    let actual = dcg(rj.ranking.iter().take(k).map(|&l| rj.grade(l)));
    actual / idcg
}

/// Mean NDCG@k over a set of queries.
pub fn mean_ndcg_at_k(queries: &[RankedJudgment], k: usize) -> Result<f64, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    Ok(queries.iter().map(|rj| ndcg_at_k(rj, k)).sum::<f64>() / queries.len() as f64)
}

/// Relative error reduction of `improved` over `baseline` against the best
/// achievable value `best`: `1 - (best - improved) / (best - baseline)`.
/// Requires `best > baseline`.
pub fn relative_error_reduction(best: f64, baseline: f64, improved: f64) -> Result<f64, EvalError> {
    if best <= baseline {
        return Err(EvalError::DegenerateDenominator(format!(
            "best ({best}) must exceed the baseline ({baseline})"
        )));
    }
    Ok(1.0 - (best - improved) / (best - baseline))
}

/// Relative improvement of `improved` over `baseline`:
/// `improved / baseline - 1`. Requires a positive baseline.
pub fn relative_improvement(baseline: f64, improved: f64) -> Result<f64, EvalError> {
    if baseline <= 0.0 {
        return Err(EvalError::DegenerateDenominator(format!(
            "baseline must be positive, got {baseline}"
        )));
    }
    Ok(improved / baseline - 1.0)
}

/// Result of a paired one-tailed t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    /// The t-statistic of the paired differences.
    pub t: f64,
    /// One-tailed p-value: the probability of a difference at least this
    /// large in favor of the second system under the null.
    pub p: f64,
    /// Degrees of freedom, `n - 1`.
    pub df: f64,
    /// Mean paired difference (`improved - baseline`).
    pub mean_diff: f64,
}

/// Paired one-tailed t-test of `improved` against `baseline`.
///
/// Differences `d_i = improved_i - baseline_i` give
/// `t = mean(d) / (sd(d) / sqrt(n))` with the sample standard deviation, and
/// the one-tailed p-value comes from the regularized incomplete beta
/// function. Identical inputs yield `t = 0, p = 0.5`; a constant nonzero
/// difference has no defined t-statistic and errors.
pub fn paired_t_test_one_tailed(
    baseline: &[f64],
    improved: &[f64],
) -> Result<PairedTTest, EvalError> {
    if baseline.len() != improved.len() {
        return Err(EvalError::LengthMismatch {
            left: baseline.len(),
            right: improved.len(),
        });
    }
    let n = baseline.len();
    if n < 2 {
        return Err(EvalError::TooFewPairs(n));
    }
    let d: Vec<f64> = improved
        .iter()
        .zip(baseline)
        .map(|(&i, &b)| i - b)
        .collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    let t = if sd == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            return Err(EvalError::ZeroVariance);
        }
    } else {
        mean / (sd / (n as f64).sqrt())
    };
    let df = n as f64 - 1.0;
    Ok(PairedTTest {
        t,
        p: one_tailed_p(t, df),
        df,
        mean_diff: mean,
    })
}

/// `P(T_df > t)` via `I_x(df/2, 1/2)` with `x = df / (df + t^2)`.
fn one_tailed_p(t: f64, df: f64) -> f64 {
    let tail = beta_reg(df / 2.0, 0.5, df / (df + t * t)) / 2.0;
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// The report marker for a p-value: `†` below 0.005, `‡` below 0.05, empty
/// otherwise.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.005 {
        "†"
    } else if p < 0.05 {
        "‡"
    } else {
        ""
    }
}
