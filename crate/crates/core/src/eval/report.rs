use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::experiment::{Condition, ExperimentConfig, RunResult};
use super::metrics::{confusion, metrics, Confusion, Metrics};
use super::stats::wilcoxon_signed_rank;
use crate::cohort::Outcome;
use crate::error::{Error, Result};
use crate::explain::ImportanceTally;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample SD; 0 for a single value.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

impl std::fmt::Display for MeanSd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.sd)
    }
}

pub const METRIC_NAMES: [&str; 9] = [
    "balanced_accuracy",
    "auc",
    "auc_pr",
    "f1",
    "f1_macro",
    "sensitivity",
    "specificity",
    "precision",
    "recall",
];

fn metric_value(m: &Metrics, name: &str) -> Option<f64> {
    match name {
        "balanced_accuracy" => Some(m.balanced_accuracy),
        "auc" => m.auc,
        "auc_pr" => m.auc_pr,
        "f1" => Some(m.f1),
        "f1_macro" => Some(m.f1_macro),
        "sensitivity" => Some(m.sensitivity),
        "specificity" => Some(m.specificity),
        "precision" => Some(m.precision),
        "recall" => Some(m.recall),
        _ => None,
    }
}

/// Metrics of one outcome × condition across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub outcome: Outcome,
    pub condition: Condition,
    pub users: Vec<String>,
    pub labels: Vec<bool>,
    pub scores: Vec<f64>,
    pub probabilities: Vec<Vec<f64>>,
    pub per_repetition: Vec<Metrics>,
    /// Mean ± SD across repetitions; a metric missing in any repetition is omitted.
    pub summary: BTreeMap<String, MeanSd>,
    /// Confusion of repetition-averaged user probabilities.
    pub confusion: Confusion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<Vec<ImportanceTally>>,
}

impl ConditionResult {
    pub fn from_run(run: RunResult) -> Result<Self> {
        let per_repetition: Vec<Metrics> =
            run.probabilities.iter().map(|p| metrics(p, &run.labels)).collect::<Result<_>>()?;
        let mut summary = BTreeMap::new();
        for name in METRIC_NAMES {
            let vals: Option<Vec<f64>> = per_repetition.iter().map(|m| metric_value(m, name)).collect();
            if let Some(v) = vals.filter(|v| !v.is_empty()) {
                summary.insert(name.to_string(), MeanSd::of(&v));
            }
        }
        let avg = mean_probabilities(&run.probabilities);
        let confusion = confusion(&avg, &run.labels, 0.5)?;
        Ok(ConditionResult {
            outcome: run.outcome,
            condition: run.condition,
            users: run.users,
            labels: run.labels,
            scores: run.scores,
            probabilities: run.probabilities,
            per_repetition,
            summary,
            confusion,
            importance: run.importance,
        })
    }

    pub fn balanced_accuracies(&self) -> Vec<f64> {
        self.per_repetition.iter().map(|m| m.balanced_accuracy).collect()
    }

    pub fn mean_balanced_accuracy(&self) -> f64 {
        MeanSd::of(&self.balanced_accuracies()).mean
    }
}

/// Per-user probability averaged over repetitions.
pub fn mean_probabilities(probabilities: &[Vec<f64>]) -> Vec<f64> {
    let n = probabilities.first().map_or(0, Vec::len);
    (0..n)
        .map(|u| probabilities.iter().map(|p| p[u]).sum::<f64>() / probabilities.len() as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub outcome: Outcome,
    pub a: Condition,
    pub b: Condition,
    pub a_balanced_accuracy: MeanSd,
    pub b_balanced_accuracy: MeanSd,
    pub p_value: Option<f64>,
    /// Why no p-value was computed.
    pub note: Option<String>,
}

/// Pairwise Wilcoxon tests of per-repetition balanced accuracy between the
/// conditions of each outcome.
pub fn compare_conditions(results: &[ConditionResult]) -> Result<Vec<ComparisonRow>> {
    let mut by_outcome: BTreeMap<Outcome, Vec<&ConditionResult>> = BTreeMap::new();
    for r in results {
        by_outcome.entry(r.outcome).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (outcome, rs) in by_outcome {
        for i in 0..rs.len() {
            for j in (i + 1)..rs.len() {
                let (a, b) = (rs[i], rs[j]);
                let (xa, xb) = (a.balanced_accuracies(), b.balanced_accuracies());
                if xa.len() != xb.len() {
                    return Err(Error::Shape(format!(
                        "{outcome}: {} has {} repetitions, {} has {}",
                        a.condition,
                        xa.len(),
                        b.condition,
                        xb.len()
                    )));
                }
                let (p_value, note) = match wilcoxon_signed_rank(&xa, &xb) {
                    Ok(w) => (Some(w.p_value), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                rows.push(ComparisonRow {
                    outcome,
                    a: a.condition,
                    b: b.condition,
                    a_balanced_accuracy: MeanSd::of(&xa),
                    b_balanced_accuracy: MeanSd::of(&xb),
                    p_value,
                    note,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub registry_hash: String,
    pub config: ExperimentConfig,
    pub results: Vec<ConditionResult>,
    pub comparisons: Vec<ComparisonRow>,
}

impl EvalReport {
    pub fn new(registry_hash: String, config: ExperimentConfig, runs: Vec<RunResult>) -> Result<Self> {
        let results: Vec<ConditionResult> =
            runs.into_iter().map(ConditionResult::from_run).collect::<Result<_>>()?;
        let comparisons = compare_conditions(&results)?;
        Ok(EvalReport {
            version: REPORT_VERSION,
            registry_hash,
            config,
            results,
            comparisons,
        })
    }

    pub fn result(&self, outcome: Outcome, condition: Condition) -> Option<&ConditionResult> {
        self.results.iter().find(|r| r.outcome == outcome && r.condition == condition)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(text)?;
        if r.version != REPORT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported report version {}", r.version)));
        }
        Ok(r)
    }

    /// One row per outcome × condition with mean and SD of each metric.
    pub fn write_metrics_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["outcome".to_string(), "condition".to_string(), "n_users".to_string()];
        for m in METRIC_NAMES {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_sd"));
        }
        header.extend(["tp", "tn", "fp", "fn"].map(String::from));
        wtr.write_record(&header)?;
        for r in &self.results {
            let mut rec = vec![r.outcome.to_string(), r.condition.to_string(), r.users.len().to_string()];
            for m in METRIC_NAMES {
                match r.summary.get(m) {
                    Some(s) => {
                        rec.push(format!("{:.6}", s.mean));
                        rec.push(format!("{:.6}", s.sd));
                    }
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            let c = r.confusion;
            rec.extend([c.tp, c.tn, c.fp, c.fn_].map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<metrics csv>", e))
    }

    pub fn write_comparisons_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["outcome", "a", "b", "a_mean", "a_sd", "b_mean", "b_sd", "p_value", "note"])?;
        for c in &self.comparisons {
            wtr.write_record([
                c.outcome.to_string(),
                c.a.to_string(),
                c.b.to_string(),
                format!("{:.6}", c.a_balanced_accuracy.mean),
                format!("{:.6}", c.a_balanced_accuracy.sd),
                format!("{:.6}", c.b_balanced_accuracy.mean),
                format!("{:.6}", c.b_balanced_accuracy.sd),
                c.p_value.map(|p| format!("{p:.6}")).unwrap_or_default(),
                c.note.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<comparisons csv>", e))
    }

    /// Per-user probabilities averaged over repetitions, with labels and scores.
    pub fn write_predictions_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["outcome", "condition", "participant_id", "label", "score", "probability"])?;
        for r in &self.results {
            let avg = mean_probabilities(&r.probabilities);
            for (i, u) in r.users.iter().enumerate() {
                wtr.write_record([
                    r.outcome.to_string(),
                    r.condition.to_string(),
                    u.clone(),
                    u8::from(r.labels[i]).to_string(),
                    r.scores[i].to_string(),
                    format!("{:.6}", avg[i]),
                ])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<predictions csv>", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(condition: Condition, bas: &[f64]) -> ConditionResult {
        ConditionResult {
            outcome: Outcome::Sdq,
            condition,
            users: vec![],
            labels: vec![],
            scores: vec![],
            probabilities: vec![],
            per_repetition: bas
                .iter()
                .map(|&b| Metrics {
                    balanced_accuracy: b,
                    ..Metrics::from_confusion(Confusion::default())
                })
                .collect(),
            summary: BTreeMap::new(),
            confusion: Confusion::default(),
            importance: None,
        }
    }

    #[test]
    fn three_conditions_give_three_rows() {
        let bas = [0.6, 0.62, 0.7, 0.65, 0.61, 0.66];
        let rs: Vec<ConditionResult> = Condition::ALL.iter().map(|&c| result(c, &bas)).collect();
        let rows = compare_conditions(&rs).unwrap();
        assert_eq!(rows.len(), 3);
        // Identical conditions: no p-value, no stars, a note.
        assert!(rows.iter().all(|r| r.p_value.is_none() && r.note.is_some()));
    }

    #[test]
    fn mean_sd() {
        let s = MeanSd::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.sd), (2.0, 2f64.sqrt()));
        assert_eq!(MeanSd::of(&[5.0]).sd, 0.0);
    }
}
