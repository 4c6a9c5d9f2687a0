//! Evaluation metrics and the time-to-accuracy speedup between two runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Split;
use crate::matrix::DenseMatrix;
use crate::nn::{probabilities, sigmoid, Task};
use crate::trainer::EpochLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    MicroF1,
    RocAuc,
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "micro_f1" | "micro-f1" => Ok(MetricKind::MicroF1),
            "roc_auc" | "roc-auc" => Ok(MetricKind::RocAuc),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric_kind: MetricKind,
    pub value: f64,
    pub split: Split,
    /// Multi-label decision threshold; unused for multi-class.
    pub threshold: f64,
}

/// Pooled micro-F1.
///
/// Multi-class: argmax per row (ties to the lowest index), which makes
/// micro-F1 equal to accuracy. Multi-label: predict `σ(ŷ) >= threshold` and
/// pool `2TP / (2TP + FP + FN)` over every `(i, c)`.
pub fn micro_f1(y_hat: &DenseMatrix, y: &DenseMatrix, task: Task, threshold: f64) -> Result<f64> {
    if y_hat.shape() != y.shape() {
        return Err(Error::shape(
            "micro_f1",
            format!("{:?} vs {:?}", y_hat.shape(), y.shape()),
        ));
    }
    if y_hat.rows() == 0 || y_hat.cols() == 0 {
        return Err(Error::UndefinedMetric("micro-F1 of an empty set".into()));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for r in 0..y_hat.rows() {
        let scores = y_hat.row(r);
        let truth = y.row(r);
        match task {
            Task::Multiclass => {
                let mut best = 0;
                for (c, &s) in scores.iter().enumerate() {
                    if s > scores[best] {
                        best = c;
                    }
                }
                for (c, &t) in truth.iter().enumerate() {
                    let pred = c == best;
                    let pos = t == 1.0;
                    match (pred, pos) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fn_ += 1,
                        (false, false) => {}
                    }
                }
            }
            Task::Multilabel => {
                for (&s, &t) in scores.iter().zip(truth) {
                    match (sigmoid(s) >= threshold, t == 1.0) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fn_ += 1,
                        (false, false) => {}
                    }
                }
            }
        }
    }
    Ok(f1_from_counts(tp, fp, fn_))
}

/// `2TP / (2TP + FP + FN)`; 1.0 when there is nothing to find and nothing
/// was predicted.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Pooled ROC-AUC via the rank statistic with average ranks for ties:
/// `(Σ ranks of positives - P(P+1)/2) / (P · N)`.
pub fn roc_auc(scores: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    if scores.shape() != y.shape() {
        return Err(Error::shape(
            "roc_auc",
            format!("{:?} vs {:?}", scores.shape(), y.shape()),
        ));
    }
    let mut pairs: Vec<(f64, bool)> = scores
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(&s, &t)| (s, t == 1.0))
        .collect();
    let positives = pairs.iter().filter(|p| p.1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(
            "ROC-AUC needs at least one positive and one negative".into(),
        ));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j + 1 < pairs.len() && pairs[j + 1].0 == pairs[i].0 {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let avg_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_group = pairs[i..=j].iter().filter(|p| p.1).count();
        rank_sum += avg_rank * pos_in_group as f64;
        i = j + 1;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Evaluates `kind` on the rows listed in `nodes`.
pub fn evaluate(
    kind: MetricKind,
    y_hat: &DenseMatrix,
    y: &DenseMatrix,
    task: Task,
    threshold: f64,
    nodes: &[usize],
) -> Result<f64> {
    let pred = y_hat.select_rows(nodes);
    let truth = y.select_rows(nodes);
    match kind {
        MetricKind::MicroF1 => micro_f1(&pred, &truth, task, threshold),
        MetricKind::RocAuc => roc_auc(&probabilities(&pred, task), &truth),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speedup {
    /// `(t1 - t2) / t1 * 100`
    Percent(f64),
    /// The candidate never matched the baseline's best validation score.
    NotReached,
}

impl fmt::Display for Speedup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speedup::Percent(p) => write!(f, "{p:.1}"),
            Speedup::NotReached => f.write_str("not-reached"),
        }
    }
}

fn check_log(log: &[EpochLog], which: &str) -> Result<()> {
    if log.is_empty() {
        return Err(Error::Validation(format!("{which} log is empty")));
    }
    if log
        .windows(2)
        .any(|w| w[1].wall_clock_s < w[0].wall_clock_s)
    {
        return Err(Error::Validation(format!(
            "{which} log wall_clock_s is not monotone"
        )));
    }
    Ok(())
}

/// Percentage of the baseline's time-to-best-validation saved by the
/// candidate.
///
/// `v1` is the baseline's best validation score and `t1` the earliest time it
/// got there; `t2` is the earliest time the candidate reaches at least `v1`.
pub fn speedup(log_baseline: &[EpochLog], log_candidate: &[EpochLog]) -> Result<Speedup> {
    check_log(log_baseline, "baseline")?;
    check_log(log_candidate, "candidate")?;
    let scored = |log: &[EpochLog]| -> Vec<(f64, f64)> {
        log.iter()
            .filter_map(|e| e.val_metric.map(|v| (e.wall_clock_s, v)))
            .collect()
    };
    let base = scored(log_baseline);
    let v1 = base
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !v1.is_finite() {
        return Err(Error::Validation(
            "baseline log has no validation scores".into(),
        ));
    }
    let t1 = base
        .iter()
        .find(|&&(_, v)| v >= v1)
        .map(|&(t, _)| t)
        .expect("v1 is attained");
    let Some(t2) = scored(log_candidate)
        .iter()
        .find(|&&(_, v)| v >= v1)
        .map(|&(t, _)| t)
    else {
        return Ok(Speedup::NotReached);
    };
    if t1 <= 0.0 {
        return Ok(Speedup::Percent(0.0));
    }
    Ok(Speedup::Percent((t1 - t2) / t1 * 100.0))
}
