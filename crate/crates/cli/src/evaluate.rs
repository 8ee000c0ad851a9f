use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use phenoscope_core::cohort::Outcome;
use phenoscope_core::contrastive::{finetune_fold, pretrain_rows, separation_ratio};
use phenoscope_core::eval::{
    ablation_pretraining, eligible_users, run_experiment, Condition, EvalReport, ExperimentConfig,
};
use phenoscope_core::features::DayFeatureRow;
use phenoscope_core::nn::derive_seed;

use crate::inputs::{ExperimentArgs, InputArgs, RunConfig};
use crate::manifest::{flush_csv, Outputs};
use crate::{Invocation, UsageError};

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[arg(long)]
    pub outcome: Outcome,
    #[arg(long, default_value = "combined")]
    pub condition: Condition,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Effective configuration snapshot for the manifest.
fn snapshot(config: &RunConfig, experiment: &ExperimentConfig) -> Result<serde_json::Value> {
    let mut c = config.clone();
    c.experiment = experiment.clone();
    Ok(serde_json::to_value(&c)?)
}

pub fn evaluate(args: &EvaluateArgs, inv: &Invocation) -> Result<()> {
    let loaded = args.inputs.load()?;
    let mut cfg = loaded.config.experiment.clone();
    args.experiment.apply(&mut cfg)?;
    let dataset = loaded.dataset()?;
    let mut runs = Vec::new();
    for &condition in &cfg.conditions {
        eprintln!(
            "evaluating {condition}: {} outcomes × {} repetitions",
            cfg.outcomes.len(),
            cfg.repetitions
        );
        runs.extend(run_experiment(&dataset, condition, &cfg, None)?);
    }
    let report = EvalReport::new(dataset.registry.hash(), cfg.clone(), runs)?;

    let mut out = Outputs::create(&args.out, loaded.files.clone())?;
    out.write("report.json", report.to_json()?.as_bytes())?;
    out.write_with("metrics.csv", |buf| report.write_metrics_csv(buf))?;
    out.write_with("comparisons.csv", |buf| report.write_comparisons_csv(buf))?;
    out.write_with("predictions.csv", |buf| report.write_predictions_csv(buf))?;

    println!("{:<9} {:<9} {:>6}  balanced accuracy", "outcome", "condition", "users");
    for r in &report.results {
        let ba = &r.summary["balanced_accuracy"];
        println!("{:<9} {:<9} {:>6}  {ba}", r.outcome.as_str(), r.condition.as_str(), r.users.len());
    }
    let seeds = BTreeMap::from([("base".to_string(), cfg.seed)]);
    out.finish(inv, snapshot(&loaded.config, &cfg)?, Some(report.registry_hash.clone()), seeds)?;
    Ok(())
}

pub fn ablate(args: &AblateArgs, inv: &Invocation) -> Result<()> {
    if args.experiment.conditions.is_some() {
        return Err(UsageError("ablate always uses the combined condition; drop --conditions".into()).into());
    }
    let loaded = args.inputs.load()?;
    let mut cfg = loaded.config.experiment.clone();
    args.experiment.apply(&mut cfg)?;
    cfg.conditions = vec![Condition::Combined];
    if cfg.train.pretrain_epochs == 0 {
        return Err(UsageError("pretrain_epochs is 0, so both ablation arms would be identical".into()).into());
    }
    let dataset = loaded.dataset()?;
    eprintln!(
        "ablating pretraining: {} outcomes × {} repetitions × 2 arms",
        cfg.outcomes.len(),
        cfg.repetitions
    );
    let ablation = ablation_pretraining(&dataset, &cfg)?;

    let mut out = Outputs::create(&args.out, loaded.files.clone())?;
    out.write_json("ablation.json", &ablation)?;
    out.write_with("ablation.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["outcome", "pretrained_mean", "pretrained_sd", "no_pretraining_mean", "no_pretraining_sd"])?;
        let rows = ablation
            .rows
            .iter()
            .map(|r| (r.outcome.as_str(), &r.pretrained, &r.no_pretraining))
            .chain(std::iter::once(("pooled", &ablation.pooled.pretrained, &ablation.pooled.no_pretraining)));
        for (name, a, b) in rows {
            w.write_record([
                name.to_string(),
                format!("{:.6}", a.mean),
                format!("{:.6}", a.sd),
                format!("{:.6}", b.mean),
                format!("{:.6}", b.sd),
            ])?;
        }
        flush_csv(w)
    })?;

    for r in &ablation.rows {
        println!(
            "{:<9} pretrained {}  no pretraining {}",
            r.outcome.as_str(),
            r.pretrained,
            r.no_pretraining
        );
    }
    let p = &ablation.pooled;
    match (&p.test, &p.note) {
        (Some(t), _) => println!(
            "pooled    pretrained {}  no pretraining {}  paired t = {:.3}, p = {:.4}",
            p.pretrained, p.no_pretraining, t.t, t.p_value
        ),
        (None, note) => println!(
            "pooled    pretrained {}  no pretraining {}  ({})",
            p.pretrained,
            p.no_pretraining,
            note.as_deref().unwrap_or("no test")
        ),
    }
    let seeds = BTreeMap::from([("base".to_string(), cfg.seed)]);
    out.finish(inv, snapshot(&loaded.config, &cfg)?, Some(dataset.registry.hash()), seeds)?;
    Ok(())
}

const TRAIN_STREAM: u64 = 0x5452_4149;

pub fn train(args: &TrainArgs, inv: &Invocation) -> Result<()> {
    let loaded = args.inputs.load()?;
    let mut cfg = loaded.config.experiment.clone();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.outcomes = vec![args.outcome];
    cfg.conditions = vec![args.condition];
    cfg.validate()?;
    let dataset = loaded.dataset()?;
    let users = eligible_users(&dataset, cfg.require_both_modalities);
    let columns = args.condition.columns(&dataset.registry);
    let rows: Vec<&DayFeatureRow> = dataset
        .rows
        .iter()
        .filter(|r| users.binary_search(&r.participant_id).is_ok())
        .filter(|r| columns.iter().any(|&c| r.values[c].is_some()))
        .collect();
    let seed = derive_seed(cfg.seed, &[TRAIN_STREAM]);
    let hash = dataset.registry.hash();
    let pre = pretrain_rows(&rows, &columns, &cfg.train, seed)?;
    let initial = pre.pretrain.probe_losses.first().copied();
    let (model, log) = finetune_fold(&pre, args.outcome, |id| dataset.label(id, args.outcome), &cfg.train, &hash)?;
    let separation = separation_ratio(pre.x.view(), &pre.groups, &pre.pretrain.embedder).ok();

    let mut out = Outputs::create(&args.out, loaded.files.clone())?;
    out.write_json("model.json", &model)?;
    let mut lines = String::new();
    for entry in &log {
        lines.push_str(&serde_json::to_string(entry)?);
        lines.push('\n');
    }
    out.write("training_log.jsonl", lines.as_bytes())?;
    out.write_json(
        "pretraining.json",
        &serde_json::json!({
            "probe_losses": pre.pretrain.probe_losses,
            "separation_ratio": separation,
        }),
    )?;
    println!(
        "trained {} / {} on {} users ({} days); pretraining probe loss {} → {}",
        args.outcome,
        args.condition,
        pre.user_ids.len(),
        rows.len(),
        initial.map_or("n/a".into(), |v| format!("{v:.4}")),
        pre.pretrain.probe_losses.last().map_or("n/a".into(), |v| format!("{v:.4}")),
    );
    let seeds = BTreeMap::from([("base".to_string(), cfg.seed), ("model".to_string(), seed)]);
    out.finish(inv, snapshot(&loaded.config, &cfg)?, Some(hash), seeds)?;
    Ok(())
}
