use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u32,
    pub tn: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
}

impl Confusion {
    pub fn total(&self) -> u32 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

fn check_aligned(probs: &[f64], labels: &[bool]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!("{} probabilities for {} labels", probs.len(), labels.len())));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Predicted positive when `probability >= threshold`.
pub fn confusion(probs: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    check_aligned(probs, labels)?;
    let mut c = Confusion::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u32, den: u32) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub balanced_accuracy: f64,
    /// Missing when only one class is present.
    pub auc: Option<f64>,
    pub auc_pr: Option<f64>,
    pub f1: f64,
    pub f1_macro: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub recall: f64,
    pub confusion: Confusion,
}

impl Metrics {
    /// Threshold metrics from counts alone; ranking metrics are left missing.
    /// Undefined ratios (zero denominators) are reported as 0.
    pub fn from_confusion(c: Confusion) -> Self {
        let sensitivity = ratio(c.tp, c.tp + c.fn_);
        let specificity = ratio(c.tn, c.tn + c.fp);
        let precision = ratio(c.tp, c.tp + c.fp);
        let npv = ratio(c.tn, c.tn + c.fn_);
        let f1 = harmonic(precision, sensitivity);
        let f1_neg = harmonic(npv, specificity);
        Metrics {
            balanced_accuracy: 0.5 * (sensitivity + specificity),
            auc: None,
            auc_pr: None,
            f1,
            f1_macro: 0.5 * (f1 + f1_neg),
            sensitivity,
            specificity,
            precision,
            recall: sensitivity,
            confusion: c,
        }
    }
}

/// Full metric bundle at the 0.5 threshold.
pub fn metrics(probs: &[f64], labels: &[bool]) -> Result<Metrics> {
    let c = confusion(probs, labels, 0.5)?;
    let mut m = Metrics::from_confusion(c);
    m.auc = auc(probs, labels)?;
    m.auc_pr = average_precision(probs, labels)?;
    Ok(m)
}

/// Midranks (1-based) of `values`; tied values share the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve as the Mann-Whitney statistic with midranks.
pub fn auc(probs: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    check_aligned(probs, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let ranks = midranks(probs);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(Some(u / (n_pos * n_neg) as f64))
}

/// Area under the precision-recall curve by step interpolation (average
/// precision). Tied scores form a single threshold.
pub fn average_precision(probs: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    check_aligned(probs, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Ok(None);
    }
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && probs[idx[j]] == probs[idx[i]] {
            tp += usize::from(labels[idx[j]]);
            seen += 1;
            j += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
        i = j;
    }
    Ok(Some(ap))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let c = confusion(&[0.9, 0.1], &[true, false], 0.5).unwrap();
        assert_eq!(c, Confusion { tp: 1, tn: 1, fp: 0, fn_: 0 });
        let c = confusion(&[0.5, 0.5], &[true, false], 0.5).unwrap();
        assert_eq!((c.tp, c.fp), (1, 1));
        assert!(confusion(&[0.5], &[true, false], 0.5).is_err());
    }

    #[test]
    fn perfect_and_majority_predictors() {
        let labels = [true, false, false, true, false];
        let perfect = metrics(&[0.9, 0.2, 0.1, 0.7, 0.3], &labels).unwrap();
        for v in [perfect.balanced_accuracy, perfect.auc.unwrap(), perfect.auc_pr.unwrap(), perfect.f1, perfect.f1_macro] {
            assert_eq!(v, 1.0);
        }
        let majority = metrics(&[0.1; 5], &labels).unwrap();
        assert_eq!(majority.balanced_accuracy, 0.5);
        assert_eq!(majority.auc, Some(0.5));
    }

    #[test]
    fn single_class_leaves_ranking_metrics_missing() {
        let m = metrics(&[0.2, 0.7], &[true, true]).unwrap();
        assert_eq!((m.auc, m.auc_pr), (None, None));
        assert_eq!(m.sensitivity, 0.5);
        assert_eq!(m.specificity, 0.0);
    }

    #[test]
    fn midrank_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn serializes_fn_field() {
        let json = serde_json::to_string(&Confusion { tp: 1, tn: 2, fp: 3, fn_: 4 }).unwrap();
        assert_eq!(json, r#"{"tp":1,"tn":2,"fp":3,"fn":4}"#);
    }
}
