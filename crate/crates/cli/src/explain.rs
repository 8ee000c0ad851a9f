use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use phenoscope_core::cohort::Outcome;
use phenoscope_core::contrastive::TrainedModel;
use phenoscope_core::eval::{eligible_users, feature_group_comparison, run_experiment, Condition, GroupComparison};
use phenoscope_core::explain::{
    aggregate_by_sensor, attribute_rows, ranked_features, AttributionConfig, FeatureImportance, GroupImportance,
    ImportanceTally,
};
use phenoscope_core::features::Dataset;
use phenoscope_core::Error as CoreError;
use serde::Serialize;

use crate::inputs::{ExperimentArgs, InputArgs, RunConfig};
use crate::manifest::{flush_csv, Outputs};
use crate::{Invocation, UsageError};

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Attribute this checkpoint on every eligible user instead of re-training held-out folds.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Permutations per attributed row.
    #[arg(long, default_value_t = AttributionConfig::default().n_permutations)]
    pub permutations: usize,
    /// Low- vs high-risk t-tests for this many top features per outcome.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct GroupTest {
    feature: String,
    #[serde(flatten)]
    comparison: Option<GroupComparison>,
    /// Why no test was computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Debug, Serialize)]
struct OutcomeExplanation {
    outcome: Outcome,
    rows: usize,
    max_efficiency_gap: f64,
    features: Vec<FeatureImportance>,
    groups: Vec<GroupImportance>,
    group_tests: Vec<GroupTest>,
}

#[derive(Debug, Serialize)]
struct Explanation {
    mode: &'static str,
    condition: Option<Condition>,
    attribution: AttributionConfig,
    outcomes: Vec<OutcomeExplanation>,
}

fn explain_outcome(dataset: &Dataset, users: &[String], outcome: Outcome, tally: &ImportanceTally, top: usize) -> Result<OutcomeExplanation> {
    let mean_abs = tally.mean_abs();
    let features = ranked_features(&mean_abs, &dataset.registry)?;
    let groups = aggregate_by_sensor(&mean_abs, &dataset.registry)?;
    let group_tests = features
        .iter()
        .take(top)
        .map(|f| match feature_group_comparison(dataset, users, outcome, &f.feature) {
            Ok(c) => GroupTest {
                feature: f.feature.clone(),
                comparison: Some(c),
                note: None,
            },
            Err(e) => GroupTest {
                feature: f.feature.clone(),
                comparison: None,
                note: Some(e.to_string()),
            },
        })
        .collect();
    Ok(OutcomeExplanation {
        outcome,
        rows: tally.rows,
        max_efficiency_gap: tally.max_efficiency_gap,
        features,
        groups,
        group_tests,
    })
}

pub fn run(args: &ExplainArgs, inv: &Invocation) -> Result<()> {
    if args.permutations == 0 {
        return Err(UsageError("--permutations must be at least 1".into()).into());
    }
    let mut loaded = args.inputs.load()?;
    let mut cfg = loaded.config.experiment.clone();
    args.experiment.apply(&mut cfg)?;
    let attribution = AttributionConfig {
        n_permutations: args.permutations,
        seed: cfg.seed,
    };
    let dataset = loaded.dataset()?;
    let users = eligible_users(&dataset, cfg.require_both_modalities);

    let mut per_outcome: Vec<(Outcome, ImportanceTally)> = Vec::new();
    let (mode, condition) = match &args.model {
        Some(path) => {
            if args.experiment.conditions.is_some() || args.experiment.reps.is_some() {
                return Err(UsageError("--conditions and --reps apply only to held-out attribution".into()).into());
            }
            loaded.files.record(path)?;
            let model = TrainedModel::load(path)?;
            if model.registry_hash != dataset.registry.hash() {
                return Err(CoreError::InvalidInput(format!(
                    "{} was trained with a different feature registry",
                    path.display()
                ))
                .into());
            }
            let outcome = model
                .outcome
                .ok_or_else(|| CoreError::InvalidInput(format!("{} records no outcome", path.display())))?;
            let rows: Vec<&[Option<f64>]> = dataset
                .rows
                .iter()
                .filter(|r| users.binary_search(&r.participant_id).is_ok())
                .map(|r| r.values.as_slice())
                .collect();
            eprintln!("attributing {} rows with {} permutations each", rows.len(), args.permutations);
            per_outcome.push((outcome, attribute_rows(&model, &rows, &attribution)?));
            cfg.outcomes = vec![outcome];
            ("model", None)
        }
        None => {
            let condition = match cfg.conditions.as_slice() {
                [c] => *c,
                _ if args.experiment.conditions.is_none() => Condition::Combined,
                _ => return Err(UsageError("explain takes a single condition".into()).into()),
            };
            cfg.conditions = vec![condition];
            cfg.attribution = Some(attribution.clone());
            eprintln!(
                "held-out attribution under {condition}: {} outcomes × {} repetitions, {} permutations per row",
                cfg.outcomes.len(),
                cfg.repetitions,
                args.permutations
            );
            for run in run_experiment(&dataset, condition, &cfg, None)? {
                let mut total = ImportanceTally::zeros(dataset.registry.len());
                for t in run.importance.iter().flatten() {
                    total.merge(t)?;
                }
                per_outcome.push((run.outcome, total));
            }
            ("held_out", Some(condition))
        }
    };

    let outcomes = per_outcome
        .iter()
        .map(|(o, t)| explain_outcome(&dataset, &users, *o, t, args.top))
        .collect::<Result<Vec<_>>>()?;
    let explanation = Explanation {
        mode,
        condition,
        attribution: attribution.clone(),
        outcomes,
    };

    let mut out = Outputs::create(&args.out, loaded.files.clone())?;
    out.write_json("explain.json", &explanation)?;
    out.write_with("importance.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["outcome", "rank", "feature", "group", "mean_abs_attribution"])?;
        for e in &explanation.outcomes {
            for (i, f) in e.features.iter().enumerate() {
                w.write_record([
                    e.outcome.as_str(),
                    &(i + 1).to_string(),
                    &f.feature,
                    f.group.as_str(),
                    &format!("{:.9}", f.mean_abs_attribution),
                ])?;
            }
        }
        flush_csv(w)
    })?;
    out.write_with("groups.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["outcome", "name", "group", "score"])?;
        for e in &explanation.outcomes {
            for g in &e.groups {
                w.write_record([e.outcome.as_str(), &g.name, g.group.as_str(), &format!("{:.9}", g.score)])?;
            }
        }
        flush_csv(w)
    })?;
    out.write_with("group_tests.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["outcome", "feature", "mean_low", "mean_high", "n_low", "n_high", "t", "df", "p_value", "note"])?;
        for e in &explanation.outcomes {
            for g in &e.group_tests {
                let mut rec = vec![e.outcome.as_str().to_string(), g.feature.clone()];
                match &g.comparison {
                    Some(c) => rec.extend([
                        format!("{:.6}", c.mean_low),
                        format!("{:.6}", c.mean_high),
                        c.n_low.to_string(),
                        c.n_high.to_string(),
                        format!("{:.4}", c.test.t),
                        format!("{:.2}", c.test.df),
                        format!("{:.6}", c.test.p_value),
                        String::new(),
                    ]),
                    None => {
                        rec.extend(std::iter::repeat_n(String::new(), 7));
                        rec.push(g.note.clone().unwrap_or_default());
                    }
                }
                w.write_record(&rec)?;
            }
        }
        flush_csv(w)
    })?;

    for e in &explanation.outcomes {
        let top: Vec<&str> = e.features.iter().take(5).map(|f| f.feature.as_str()).collect();
        println!("{:<9} top features: {}", e.outcome.as_str(), top.join(", "));
    }
    let seeds = BTreeMap::from([("base".to_string(), cfg.seed), ("attribution".to_string(), attribution.seed)]);
    let snapshot = RunConfig {
        experiment: cfg,
        ..loaded.config.clone()
    };
    out.finish(inv, serde_json::to_value(&snapshot)?, Some(dataset.registry.hash()), seeds)?;
    Ok(())
}
