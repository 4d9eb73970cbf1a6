//! Confusion counts, threshold metrics and rank-statistic AUROC.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no predictions")]
    Empty,
    #[error("score at index {0} is not finite")]
    NonFinite(usize),
    #[error("AUROC is undefined when only one class is present")]
    SingleClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    pub threshold: f64,
    /// Report recall and accuracy only (benchmarks without negatives).
    pub recall_only: bool,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions { threshold: 0.5, recall_only: false }
    }
}

/// Undefined ratios are `None` rather than 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: f64,
    pub auroc: Option<f64>,
}

fn frac(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

impl MetricsReport {
    pub fn from_confusion(tp: usize, fp: usize, fn_: usize, tn: usize) -> MetricsReport {
        let precision = frac(tp, tp + fp);
        let recall = frac(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        let total = tp + fp + fn_ + tn;
        MetricsReport {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            accuracy: frac(tp + tn, total).unwrap_or(0.0),
            auroc: None,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub const CSV_HEADER: &'static str = "tp,fp,fn,tn,precision,recall,f1,accuracy,auroc";

    pub fn to_csv_row(&self) -> String {
        let o = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{:.6},{}",
            self.tp,
            self.fp,
            self.fn_,
            self.tn,
            o(self.precision),
            o(self.recall),
            o(self.f1),
            self.accuracy,
            o(self.auroc)
        )
    }
}

fn check(preds: &[(f64, bool)]) -> Result<(), MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    match preds.iter().position(|(s, _)| !s.is_finite()) {
        Some(i) => Err(MetricsError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Mann-Whitney statistic: P(score_pos > score_neg) + ½ P(tie).
pub fn auroc(preds: &[(f64, bool)]) -> Result<f64, MetricsError> {
    check(preds)?;
    let n_pos = preds.iter().filter(|p| p.1).count();
    let n_neg = preds.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&a, &b| preds[a].0.total_cmp(&preds[b].0));
    // sum of average (1-based) ranks of the positives
    let mut pos_ranks = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && preds[idx[j + 1]].0 == preds[idx[i]].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        pos_ranks += avg * idx[i..=j].iter().filter(|&&k| preds[k].1).count() as f64;
        i = j + 1;
    }
    let u = pos_ranks - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Counts at `score >= threshold`; AUROC is absent for single-class input.
pub fn compute_metrics(preds: &[(f64, bool)], opts: &MetricsOptions) -> Result<MetricsReport, MetricsError> {
    check(preds)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for &(s, y) in preds {
        match (s >= opts.threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let mut r = MetricsReport::from_confusion(tp, fp, fn_, tn);
    r.auroc = match auroc(preds) {
        Ok(a) => Some(a),
        Err(MetricsError::SingleClass) => None,
        Err(e) => return Err(e),
    };
    if opts.recall_only {
        r.precision = None;
        r.f1 = None;
    }
    Ok(r)
}
