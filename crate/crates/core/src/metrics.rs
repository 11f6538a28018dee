//! Detection and calibration metrics.
//!
//! Detection AUCs treat flagged samples (OOD or misclassified) as positives
//! and expect larger scores to indicate positives.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Matrix;
use crate::uncertainty::ScoreTable;

pub const ECE_BINS: usize = 15;
pub const RELIABILITY_BINS: usize = 20;

fn check_flags(scores: &[f64], flags: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != flags.len() {
        return Err(Error::shape(
            "auc",
            format!("{} scores for {} flags", scores.len(), flags.len()),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let pos = flags.iter().filter(|&&f| f).count();
    let neg = flags.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassScores);
    }
    Ok((pos, neg))
}

/// Indices sorted by score, grouped into runs of equal scores.
fn tie_groups(scores: &[f64], descending: bool) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = scores[a].total_cmp(&scores[b]);
        if descending { o.reverse() } else { o }
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Area under the ROC curve via the Mann–Whitney statistic with average
/// ranks, so tied positive/negative pairs count one half.
pub fn auc_roc(scores: &[f64], flags: &[bool]) -> Result<f64> {
    let (pos, neg) = check_flags(scores, flags)?;
    let mut rank_sum = 0.0;
    let mut next_rank = 1usize;
    for g in tie_groups(scores, false) {
        let avg = (2 * next_rank + g.len() - 1) as f64 / 2.0;
        rank_sum += avg * g.iter().filter(|&&i| flags[i]).count() as f64;
        next_rank += g.len();
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Average precision: precision at each distinct threshold weighted by the
/// recall gained there, sweeping scores from high to low.
pub fn auc_pr(scores: &[f64], flags: &[bool]) -> Result<f64> {
    let (pos, _) = check_flags(scores, flags)?;
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    for g in tie_groups(scores, true) {
        let gained = g.iter().filter(|&&i| flags[i]).count();
        tp += gained;
        seen += g.len();
        if gained > 0 {
            ap += (gained as f64 / pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

fn check_probs(probs: &Matrix, labels: &[usize]) -> Result<()> {
    if probs.rows() != labels.len() {
        return Err(Error::shape(
            "calibration",
            format!("{} rows for {} labels", probs.rows(), labels.len()),
        ));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= probs.cols()) {
        return Err(Error::LabelOutOfRange {
            node: labels.iter().position(|&l| l == y).unwrap_or(0),
            label: y,
            num_classes: probs.cols(),
        });
    }
    Ok(())
}

/// Expected calibration error over `bins` equal-width confidence bins
/// `(b/B, (b+1)/B]` on the max probability.
pub fn ece(probs: &Matrix, labels: &[usize], bins: usize) -> Result<f64> {
    check_probs(probs, labels)?;
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let n = labels.len();
    if n == 0 {
        return Ok(0.0);
    }
    let pred = probs.argmax_rows();
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut correct = vec![0usize; bins];
    for (v, r) in probs.row_iter().enumerate() {
        let conf = r[pred[v]];
        let b = ((conf * bins as f64).ceil() as usize).clamp(1, bins) - 1;
        count[b] += 1;
        conf_sum[b] += conf;
        correct[b] += usize::from(pred[v] == labels[v]);
    }
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let m = count[b] as f64;
            (m / n as f64) * (correct[b] as f64 / m - conf_sum[b] / m).abs()
        })
        .sum())
}

/// Mean over samples of `Σ_c (p_c − 1[c = y])²`.
pub fn brier(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check_probs(probs, labels)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = probs
        .row_iter()
        .zip(labels)
        .map(|(r, &y)| {
            r.iter()
                .enumerate()
                .map(|(c, &p)| {
                    let t = if c == y { 1.0 } else { 0.0 };
                    (p - t) * (p - t)
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Aleatoric,
    Epistemic,
}

fn column(table: &ScoreTable, kind: ScoreKind) -> Vec<f64> {
    match kind {
        ScoreKind::Aleatoric => table.aleatoric(),
        ScoreKind::Epistemic => table.epistemic(),
    }
}

/// AUC-ROC and AUC-PR for detecting OOD rows.
pub fn ood_detection(table: &ScoreTable, kind: ScoreKind) -> Result<(f64, f64)> {
    let s = column(table, kind);
    let f = table.ood_flags();
    Ok((auc_roc(&s, &f)?, auc_pr(&s, &f)?))
}

/// AUC-ROC for detecting misclassified in-distribution rows.
pub fn misclassification_auc(table: &ScoreTable, kind: ScoreKind) -> Result<f64> {
    let id = table.in_distribution();
    let wrong: Vec<bool> = id.rows.iter().map(|r| !r.is_correct).collect();
    auc_roc(&column(&id, kind), &wrong)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityBin {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Empty bins have no accuracy.
    pub accuracy: Option<f64>,
}

/// Accuracy per confidence bin, where confidence is the negated uncertainty
/// min-max normalised to `[0, 1]`. Bins are `[b/B, (b+1)/B)` with the last
/// one closed. Constant uncertainty puts every sample at confidence 1.
pub fn reliability_curve(uncertainty: &[f64], correct: &[bool], bins: usize) -> Result<Vec<ReliabilityBin>> {
    if uncertainty.len() != correct.len() {
        return Err(Error::shape(
            "reliability_curve",
            format!("{} scores for {} flags", uncertainty.len(), correct.len()),
        ));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let lo = uncertainty.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = uncertainty.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut count = vec![0usize; bins];
    let mut hits = vec![0usize; bins];
    for (&u, &c) in uncertainty.iter().zip(correct) {
        let conf = if hi > lo { (hi - u) / (hi - lo) } else { 1.0 };
        let b = ((conf * bins as f64).floor() as usize).min(bins - 1);
        count[b] += 1;
        hits[b] += usize::from(c);
    }
    Ok((0..bins)
        .map(|b| ReliabilityBin {
            bin: b,
            lower: b as f64 / bins as f64,
            upper: (b + 1) as f64 / bins as f64,
            count: count[b],
            accuracy: (count[b] > 0).then(|| hits[b] as f64 / count[b] as f64),
        })
        .collect())
}
