//! Evaluation metrics with explicit tie handling.
//!
//! ROC-AUC uses the midrank statistic, so tied scores contribute half wins —
//! identical to averaging over all positive/negative pairs. Average precision
//! walks distinct-score thresholds, so a block of tied scores forms a single
//! precision/recall point.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    RocAuc,
    Ap,
    Mae,
    Rmse,
}

impl MetricKind {
    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricKind::RocAuc | MetricKind::Ap)
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::RocAuc => "roc_auc",
            MetricKind::Ap => "ap",
            MetricKind::Mae => "mae",
            MetricKind::Rmse => "rmse",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("predictions ({preds}) and targets ({targets}) are misaligned")]
    Misaligned { preds: usize, targets: usize },
    #[error("empty input")]
    Empty,
    #[error("targets contain a single class; {0} is undefined")]
    SingleClass(&'static str),
    #[error("binary metric requires 0/1 targets, found {0}")]
    NotBinary(f64),
}

pub fn metric(preds: &[f64], targets: &[f64], kind: MetricKind) -> Result<f64, MetricError> {
    if preds.len() != targets.len() {
        return Err(MetricError::Misaligned { preds: preds.len(), targets: targets.len() });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    match kind {
        MetricKind::Mae => Ok(preds
            .iter()
            .zip(targets)
            .map(|(p, t)| (p - t).abs())
            .sum::<f64>()
            / preds.len() as f64),
        MetricKind::Rmse => Ok((preds
            .iter()
            .zip(targets)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / preds.len() as f64)
            .sqrt()),
        MetricKind::RocAuc => roc_auc(preds, targets),
        MetricKind::Ap => average_precision(preds, targets),
    }
}

fn check_binary(targets: &[f64], name: &'static str) -> Result<(usize, usize), MetricError> {
    let mut pos = 0;
    let mut neg = 0;
    for &t in targets {
        if t == 1.0 {
            pos += 1;
        } else if t == 0.0 {
            neg += 1;
        } else {
            return Err(MetricError::NotBinary(t));
        }
    }
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass(name));
    }
    Ok((pos, neg))
}

/// Rank statistic with midranks for ties:
/// AUC = (Σ ranks(positives) − P(P+1)/2) / (P·N).
fn roc_auc(preds: &[f64], targets: &[f64]) -> Result<f64, MetricError> {
    let (pos, neg) = check_binary(targets, "roc_auc")?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].total_cmp(&preds[b]));
    let mut ranks = vec![0.0; preds.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && preds[order[j + 1]] == preds[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied entries share the midrank
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = midrank;
        }
        i = j + 1;
    }
    let rank_sum: f64 = ranks
        .iter()
        .zip(targets)
        .filter(|(_, &t)| t == 1.0)
        .map(|(r, _)| r)
        .sum();
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Threshold-walk average precision: AP = Σ_t (ΔTP_t / P) · precision_t over
/// distinct score thresholds, descending.
fn average_precision(preds: &[f64], targets: &[f64]) -> Result<f64, MetricError> {
    let (pos, _) = check_binary(targets, "ap")?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].total_cmp(&preds[a]));
    let mut tp = 0.0;
    let mut seen = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut tp_block = 0.0;
        while j < order.len() && preds[order[j]] == preds[order[i]] {
            tp_block += targets[order[j]];
            j += 1;
        }
        tp += tp_block;
        seen += (j - i) as f64;
        if tp_block > 0.0 {
            ap += (tp_block / pos as f64) * (tp / seen);
        }
        i = j;
    }
    Ok(ap)
}

/// Mean and population standard deviation over seeds.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
