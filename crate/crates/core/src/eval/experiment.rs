use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::Outcome;
use crate::contrastive::{finetune_fold, predict_user, pretrain_rows, TrainConfig};
use crate::error::{Error, Result};
use crate::explain::{attribute_rows, AttributionConfig, ImportanceTally};
use crate::features::{columns_where, Dataset, DayFeatureRow, FeatureRegistry, SensorGroup};
use crate::nn::derive_seed;

/// Which feature columns a model may read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Passive,
    Active,
    Combined,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Passive, Condition::Active, Condition::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Passive => "passive",
            Condition::Active => "active",
            Condition::Combined => "combined",
        }
    }

    pub fn includes(self, group: SensorGroup) -> bool {
        match self {
            Condition::Passive => !group.is_active(),
            Condition::Active => group.is_active(),
            Condition::Combined => true,
        }
    }

    pub fn columns(self, registry: &FeatureRegistry) -> Vec<usize> {
        columns_where(registry, |g| self.includes(g))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown condition `{s}` (passive, active, combined)")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test_user: String,
    pub train_users: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// One fold per user, in sorted user order.
pub fn loso_folds(users: &[&str]) -> Result<FoldPlan> {
    let sorted: BTreeSet<&str> = users.iter().copied().collect();
    if sorted.len() != users.len() {
        return Err(Error::InvalidInput("duplicate user ids".into()));
    }
    if sorted.len() < 2 {
        return Err(Error::InsufficientData("leave-one-subject-out needs at least 2 users".into()));
    }
    let folds = sorted
        .iter()
        .map(|&test| Fold {
            test_user: test.to_string(),
            train_users: sorted.iter().filter(|&&u| u != test).map(|u| u.to_string()).collect(),
        })
        .collect();
    Ok(FoldPlan { folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub repetitions: usize,
    pub seed: u64,
    pub outcomes: Vec<Outcome>,
    pub conditions: Vec<Condition>,
    /// Evaluate only users with both self-report and sensor data, so every
    /// condition scores the same people.
    pub require_both_modalities: bool,
    /// When set, every fold attributes its held-out rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribution: Option<AttributionConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            repetitions: 10,
            seed: 0,
            outcomes: Outcome::ALL.to_vec(),
            conditions: Condition::ALL.to_vec(),
            require_both_modalities: true,
            attribution: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if self.outcomes.is_empty() || self.conditions.is_empty() {
            return Err(Error::Config("need at least one outcome and one condition".into()));
        }
        Ok(())
    }
}

/// Users scored by the experiment, sorted.
pub fn eligible_users(dataset: &Dataset, require_both: bool) -> Vec<String> {
    let active = Condition::Active.columns(&dataset.registry);
    let passive = Condition::Passive.columns(&dataset.registry);
    let has = |r: &DayFeatureRow, cols: &[usize]| cols.iter().any(|&c| r.values[c].is_some());
    let mut with_active = BTreeSet::new();
    let mut with_passive = BTreeSet::new();
    for r in &dataset.rows {
        if has(r, &active) {
            with_active.insert(r.participant_id.as_str());
        }
        if has(r, &passive) {
            with_passive.insert(r.participant_id.as_str());
        }
    }
    dataset
        .users()
        .into_iter()
        .filter(|u| !require_both || (with_active.contains(u) && with_passive.contains(u)))
        .map(str::to_string)
        .collect()
}

/// Per-user probabilities for one outcome under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub outcome: Outcome,
    pub condition: Condition,
    pub users: Vec<String>,
    pub labels: Vec<bool>,
    /// Questionnaire score behind each label.
    pub scores: Vec<f64>,
    /// `probabilities[rep][user]`.
    pub probabilities: Vec<Vec<f64>>,
    /// Held-out attributions per repetition, pooled over folds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<Vec<ImportanceTally>>,
}

/// What one fold trained on; handed to an observer for leakage checks.
#[derive(Debug, Clone)]
pub struct FoldRecord {
    pub repetition: usize,
    pub test_user: String,
    /// Users whose rows were used for normalization, pretraining and fine-tuning.
    pub training_users: Vec<String>,
}

pub type FoldObserver<'a> = &'a (dyn Fn(&FoldRecord) + Sync);

/// Seed of one (repetition, fold) cell; fold index is the test user's position
/// among the eligible users, so conditions and arms share seeds.
pub fn fold_seed(base: u64, repetition: usize, fold: usize) -> u64 {
    derive_seed(base, &[repetition as u64, fold as u64])
}

const ATTRIBUTION_STREAM: u64 = 0x5348_4150;

/// Repeated leave-one-subject-out evaluation of `condition` for each outcome.
///
/// Each (repetition, fold) normalizes and pretrains on the training users only,
/// then fine-tunes one classifier per outcome from that shared embedder and
/// averages its day-level probabilities over the held-out user's rows.
pub fn run_experiment(
    dataset: &Dataset,
    condition: Condition,
    config: &ExperimentConfig,
    observer: Option<FoldObserver>,
) -> Result<Vec<RunResult>> {
    config.validate()?;
    let columns = condition.columns(&dataset.registry);
    if columns.is_empty() {
        return Err(Error::Config(format!("registry has no {condition} columns")));
    }
    let all_users = eligible_users(dataset, config.require_both_modalities);
    let rows: Vec<&DayFeatureRow> = dataset
        .rows
        .iter()
        .filter(|r| all_users.binary_search(&r.participant_id).is_ok())
        .filter(|r| columns.iter().any(|&c| r.values[c].is_some()))
        .collect();
    let users: Vec<String> = rows
        .iter()
        .map(|r| r.participant_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let refs: Vec<&str> = users.iter().map(String::as_str).collect();
    let plan = loso_folds(&refs)?;
    let fold_index: Vec<usize> = users
        .iter()
        .map(|u| all_users.binary_search(u).expect("subset of eligible users"))
        .collect();

    let mut labels = vec![Vec::with_capacity(users.len()); config.outcomes.len()];
    let mut scores = vec![Vec::with_capacity(users.len()); config.outcomes.len()];
    for u in &users {
        let meta = dataset
            .meta(u)
            .ok_or_else(|| Error::InvalidInput(format!("participant {u} has rows but no metadata")))?;
        for (k, &o) in config.outcomes.iter().enumerate() {
            labels[k].push(meta.labels.get(o));
            scores[k].push(meta.score(o));
        }
    }
    let registry_hash = dataset.registry.hash();

    let cells: Vec<(usize, usize)> = (0..config.repetitions)
        .flat_map(|rep| (0..plan.folds.len()).map(move |f| (rep, f)))
        .collect();
    type CellOutput = Vec<(f64, Option<ImportanceTally>)>;
    let outputs: Vec<Result<CellOutput>> = cells
        .par_iter()
        .map(|&(rep, f)| {
            let fold = &plan.folds[f];
            let ctx = format!("{condition}, repetition {rep}, test user {}", fold.test_user);
            let train_rows: Vec<&DayFeatureRow> =
                rows.iter().copied().filter(|r| r.participant_id != fold.test_user).collect();
            let test_rows: Vec<&[Option<f64>]> = rows
                .iter()
                .filter(|r| r.participant_id == fold.test_user)
                .map(|r| r.values.as_slice())
                .collect();
            let seed = fold_seed(config.seed, rep, fold_index[f]);
            let pre = pretrain_rows(&train_rows, &columns, &config.train, seed).map_err(|e| e.with_context(&ctx))?;
            if let Some(obs) = observer {
                obs(&FoldRecord {
                    repetition: rep,
                    test_user: fold.test_user.clone(),
                    training_users: pre.user_ids.clone(),
                });
            }
            config
                .outcomes
                .iter()
                .map(|&o| {
                    let label_of = |id: &str| dataset.label(id, o);
                    let (model, _) = finetune_fold(&pre, o, label_of, &config.train, &registry_hash)
                        .map_err(|e| e.with_context(&format!("{o}, {ctx}")))?;
                    let p = predict_user(&model, &test_rows)?;
                    let tally = match &config.attribution {
                        Some(a) => {
                            let cfg = AttributionConfig {
                                seed: derive_seed(a.seed ^ seed, &[ATTRIBUTION_STREAM, o.index() as u64]),
                                ..a.clone()
                            };
                            Some(attribute_rows(&model, &test_rows, &cfg)?)
                        }
                        None => None,
                    };
                    Ok((p, tally))
                })
                .collect()
        })
        .collect();

    let width = dataset.registry.len();
    let mut probs = vec![vec![vec![0.0; users.len()]; config.repetitions]; config.outcomes.len()];
    let mut importance = vec![vec![ImportanceTally::zeros(width); config.repetitions]; config.outcomes.len()];
    for (&(rep, f), out) in cells.iter().zip(outputs) {
        for (k, (p, tally)) in out?.into_iter().enumerate() {
            probs[k][rep][f] = p;
            if let Some(t) = tally {
                importance[k][rep].merge(&t)?;
            }
        }
    }
    Ok(config
        .outcomes
        .iter()
        .enumerate()
        .map(|(k, &outcome)| RunResult {
            outcome,
            condition,
            users: users.clone(),
            labels: labels[k].clone(),
            scores: scores[k].clone(),
            probabilities: std::mem::take(&mut probs[k]),
            importance: config.attribution.as_ref().map(|_| std::mem::take(&mut importance[k])),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_examples() {
        let plan = loso_folds(&["b", "a", "c"]).unwrap();
        assert_eq!(plan.folds.len(), 3);
        assert_eq!(plan.folds[0].test_user, "a");
        assert!(plan.folds.iter().all(|f| f.train_users.len() == 2));
        assert_eq!(loso_folds(&["x", "y"]).unwrap().folds.len(), 2);
        assert!(loso_folds(&["x"]).is_err());
        assert!(loso_folds(&["x", "x"]).is_err());
    }

    #[test]
    fn condition_parsing() {
        for c in Condition::ALL {
            assert_eq!(c.as_str().parse::<Condition>().unwrap(), c);
        }
        assert!("both".parse::<Condition>().is_err());
    }
}
