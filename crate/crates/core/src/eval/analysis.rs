use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, Condition, ExperimentConfig};
use super::report::{ConditionResult, MeanSd};
use super::stats::{paired_t_test, welch_t_test, TTestResult};
use crate::cohort::Outcome;
use crate::error::{Error, Result};
use crate::features::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub outcome: Outcome,
    pub pretrained: MeanSd,
    pub no_pretraining: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// Balanced accuracy averaged over outcomes, per repetition.
    pub pooled_pretrained: Vec<f64>,
    pub pooled_no_pretraining: Vec<f64>,
    pub pooled: AblationPooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPooled {
    pub pretrained: MeanSd,
    pub no_pretraining: MeanSd,
    pub test: Option<TTestResult>,
    /// Why the paired test could not be computed.
    pub note: Option<String>,
}

fn pooled(results: &[ConditionResult], reps: usize) -> Vec<f64> {
    (0..reps)
        .map(|r| results.iter().map(|c| c.per_repetition[r].balanced_accuracy).sum::<f64>() / results.len() as f64)
        .collect()
}

/// Builds the ablation table from the two arms' results (same outcomes, same order).
pub fn ablation_from_results(pretrained: &[ConditionResult], baseline: &[ConditionResult]) -> Result<AblationReport> {
    if pretrained.is_empty() || pretrained.len() != baseline.len() {
        return Err(Error::Shape("ablation arms differ in outcomes".into()));
    }
    let reps = pretrained[0].per_repetition.len();
    let mut rows = Vec::new();
    for (p, b) in pretrained.iter().zip(baseline) {
        if p.outcome != b.outcome || p.per_repetition.len() != reps || b.per_repetition.len() != reps {
            return Err(Error::Shape("ablation arms differ in outcomes or repetitions".into()));
        }
        rows.push(AblationRow {
            outcome: p.outcome,
            pretrained: MeanSd::of(&p.balanced_accuracies()),
            no_pretraining: MeanSd::of(&b.balanced_accuracies()),
        });
    }
    let pp = pooled(pretrained, reps);
    let pb = pooled(baseline, reps);
    let (test, note) = match paired_t_test(&pp, &pb) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(AblationReport {
        rows,
        pooled: AblationPooled {
            pretrained: MeanSd::of(&pp),
            no_pretraining: MeanSd::of(&pb),
            test,
            note,
        },
        pooled_pretrained: pp,
        pooled_no_pretraining: pb,
    })
}

/// Runs the combined condition with pretraining as configured and with zero
/// pretraining epochs, seeds otherwise identical.
pub fn ablation_pretraining(dataset: &Dataset, config: &ExperimentConfig) -> Result<AblationReport> {
    let arm = |cfg: &ExperimentConfig| -> Result<Vec<ConditionResult>> {
        run_experiment(dataset, Condition::Combined, cfg, None)?
            .into_iter()
            .map(ConditionResult::from_run)
            .collect()
    };
    let pretrained = arm(config)?;
    let mut base_cfg = config.clone();
    base_cfg.train.pretrain_epochs = 0;
    let baseline = arm(&base_cfg)?;
    ablation_from_results(&pretrained, &baseline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAccuracy {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// Missing for an empty bin.
    pub accuracy: Option<f64>,
}

/// Fraction of correct risk calls (probability ≥ 0.5 vs label) per score bin.
/// Bins are `[edges[i], edges[i+1])`, the last one closed.
pub fn accuracy_by_score_bin(probs: &[f64], labels: &[bool], scores: &[f64], edges: &[f64]) -> Result<Vec<BinAccuracy>> {
    if probs.len() != labels.len() || probs.len() != scores.len() {
        return Err(Error::Shape("probabilities, labels and scores differ in length".into()));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("bin edges must be strictly increasing with at least two entries".into()));
    }
    let last = edges.len() - 2;
    let mut counts = vec![(0usize, 0usize); edges.len() - 1];
    for ((&p, &y), &s) in probs.iter().zip(labels).zip(scores) {
        let bin = (0..=last)
            .find(|&i| s >= edges[i] && (s < edges[i + 1] || (i == last && s <= edges[i + 1])))
            .ok_or_else(|| Error::InvalidInput(format!("score {s} outside bins [{}, {}]", edges[0], edges[last + 1])))?;
        counts[bin].0 += 1;
        counts[bin].1 += usize::from((p >= 0.5) == y);
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &(n, ok))| BinAccuracy {
            lo: edges[i],
            hi: edges[i + 1],
            n,
            accuracy: (n > 0).then(|| ok as f64 / n as f64),
        })
        .collect())
}

/// Default score bins per outcome. For SDQ and SCI the third and fourth bins
/// sit on either side of the risk threshold.
pub fn default_score_bins(outcome: Outcome) -> Vec<f64> {
    match outcome {
        Outcome::Sdq => vec![0.0, 9.0, 13.0, 16.0, 19.0, 24.0, 40.0],
        Outcome::Insomnia => vec![0.0, 8.0, 12.0, 17.0, 21.0, 25.0, 32.0],
        Outcome::Suicidal => vec![0.0, 1.0, 2.0, 3.0],
        Outcome::Eating => vec![0.0, 1.5, 2.2, 3.2, 4.2, 6.0],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub feature: String,
    pub mean_low: f64,
    pub mean_high: f64,
    pub n_low: usize,
    pub n_high: usize,
    pub test: TTestResult,
}

/// Welch test of per-user feature means between low- and high-risk users.
/// Users with no observed value for the feature are skipped.
pub fn feature_group_comparison(dataset: &Dataset, users: &[String], outcome: Outcome, feature: &str) -> Result<GroupComparison> {
    let col = dataset
        .registry
        .position(feature)
        .ok_or_else(|| Error::InvalidInput(format!("unknown feature `{feature}`")))?;
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in &dataset.rows {
        if let Some(v) = r.values[col] {
            let e = sums.entry(r.participant_id.as_str()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let (mut low, mut high) = (Vec::new(), Vec::new());
    for u in users {
        let (Some(&(s, n)), Some(label)) = (sums.get(u.as_str()), dataset.label(u, outcome)) else {
            continue;
        };
        if label {
            high.push(s / n as f64);
        } else {
            low.push(s / n as f64);
        }
    }
    let test = welch_t_test(&low, &high)?;
    Ok(GroupComparison {
        feature: feature.to_string(),
        mean_low: MeanSd::of(&low).mean,
        mean_high: MeanSd::of(&high).mean,
        n_low: low.len(),
        n_high: high.len(),
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins() {
        let r = accuracy_by_score_bin(&[0.9, 0.8], &[true, true], &[20.0, 30.0], &[0.0, 16.0, 40.0]).unwrap();
        assert_eq!(r[0].accuracy, None);
        assert_eq!(r[1].accuracy, Some(1.0));
        assert_eq!(r[1].n, 2);
        // Upper edge is closed on the last bin only.
        let r = accuracy_by_score_bin(&[0.1], &[false], &[40.0], &[0.0, 16.0, 40.0]).unwrap();
        assert_eq!(r[1].n, 1);
        assert!(accuracy_by_score_bin(&[0.1], &[false], &[41.0], &[0.0, 40.0]).is_err());
    }
}
