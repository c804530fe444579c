//! Ranking and thresholded metrics for multi-label predictions.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LabelVocabulary;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mann-Whitney AUC: probability a random positive outscores a random
/// negative, ties counting one half. `None` when either class is absent.
pub fn auc_score(scores: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of (1-based, tie-averaged) ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += avg_rank * pos_in_group as f64;
        i = j;
    }
    let p = n_pos as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Some(u / (p * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are predicted positive; the first point uses `+inf`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// One point per distinct score, from `(0, 0)` to `(1, 1)`.
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput("roc curve needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(points)
}

pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

/// Micro-averaged precision / recall / F1 over all labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverallPrf {
    pub op: f64,
    pub or: f64,
    pub of1: f64,
    /// Set when no positives were predicted (OP reported as 0).
    pub op_undefined: bool,
    /// Set when there are no true positives in the ground truth (OR reported as 0).
    pub or_undefined: bool,
    pub n_correct: u64,
    pub n_ground: u64,
    pub n_predicted: u64,
}

pub fn overall_prf(predictions: &Array2<u8>, truths: &Array2<u8>) -> Result<OverallPrf> {
    if predictions.dim() != truths.dim() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs truths {:?}",
            predictions.dim(),
            truths.dim()
        )));
    }
    let (mut nc, mut ng, mut np) = (0u64, 0u64, 0u64);
    for (&p, &t) in predictions.iter().zip(truths.iter()) {
        nc += u64::from(p == 1 && t == 1);
        ng += u64::from(t == 1);
        np += u64::from(p == 1);
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let op = ratio(nc, np);
    let or = ratio(nc, ng);
    let of1 = if op + or > 0.0 { 2.0 * op * or / (op + or) } else { 0.0 };
    Ok(OverallPrf {
        op,
        or,
        of1,
        op_undefined: np == 0,
        or_undefined: ng == 0,
        n_correct: nc,
        n_ground: ng,
        n_predicted: np,
    })
}

/// `sigma(O) > 0.5`, i.e. `O > 0`.
pub fn threshold_logits(logits: &Array2<f64>) -> Array2<u8> {
    logits.mapv(|o| u8::from(sigmoid(o) > 0.5))
}

/// Labels of one sample ranked by `sigma(O)`, ties broken by label index.
pub fn top_k(logits: ArrayView1<'_, f64>, vocab: &LabelVocabulary, k: usize) -> Vec<(String, f64)> {
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| match logits[b].total_cmp(&logits[a]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    order
        .into_iter()
        .take(k.min(logits.len()))
        .map(|j| (vocab.labels()[j].clone(), sigmoid(logits[j])))
        .collect()
}

pub fn top_k_table(logits: &Array2<f64>, vocab: &LabelVocabulary, k: usize) -> Vec<Vec<(String, f64)>> {
    logits.rows().into_iter().map(|row| top_k(row, vocab, k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub labels: Vec<String>,
    /// `None` where the evaluated split has a single class for that label.
    pub per_label_auc: Vec<Option<f64>>,
    pub mean_auc: Option<f64>,
    pub undefined_auc_labels: Vec<String>,
    pub overall: OverallPrf,
    #[serde(skip)]
    pub roc: Vec<Option<Vec<RocPoint>>>,
}

/// Scores every label column of `logits` against `truths` (both `N x C`).
pub fn evaluate(logits: &Array2<f64>, truths: &Array2<u8>, vocab: &LabelVocabulary) -> Result<EvaluationReport> {
    if logits.dim() != truths.dim() || logits.ncols() != vocab.len() {
        return Err(Error::Shape(format!(
            "logits {:?}, truths {:?}, {} labels",
            logits.dim(),
            truths.dim(),
            vocab.len()
        )));
    }
    let mut per_label_auc = Vec::with_capacity(vocab.len());
    let mut roc = Vec::with_capacity(vocab.len());
    let mut undefined = Vec::new();
    for j in 0..vocab.len() {
        let scores: Vec<f64> = logits.column(j).iter().map(|&o| sigmoid(o)).collect();
        let labels: Vec<u8> = truths.column(j).to_vec();
        let auc = auc_score(&scores, &labels);
        if auc.is_none() {
            undefined.push(vocab.labels()[j].clone());
        }
        per_label_auc.push(auc);
        roc.push(roc_points(&scores, &labels).ok());
    }
    let defined: Vec<f64> = per_label_auc.iter().flatten().copied().collect();
    let mean_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(EvaluationReport {
        labels: vocab.labels().to_vec(),
        per_label_auc,
        mean_auc,
        undefined_auc_labels: undefined,
        overall: overall_prf(&threshold_logits(logits), truths)?,
        roc,
    })
}
