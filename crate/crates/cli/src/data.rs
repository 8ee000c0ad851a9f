use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use phenoscope_core::cohort::{cohort_summary, Cohort, STUDY_DAYS};
use phenoscope_core::features::{correlation_matrix, Dataset};

use crate::inputs::InputArgs;
use crate::manifest::{flush_csv, Outputs};
use crate::{DataError, Invocation};

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Participants with any self-report or sensor record on each study day.
fn completeness(cohort: &Cohort) -> Vec<(u32, usize, usize)> {
    let starts = cohort.study_starts();
    let mut active: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); STUDY_DAYS as usize];
    let mut passive = active.clone();
    for r in &cohort.active {
        if let Some(d) = starts.get(&r.participant_id).and_then(|&s| Cohort::day_index(s, r.date)) {
            active[d as usize].insert(&r.participant_id);
        }
    }
    for e in &cohort.passive {
        if let Some(d) = starts.get(&e.participant_id).and_then(|&s| Cohort::day_index(s, e.local_date())) {
            passive[d as usize].insert(&e.participant_id);
        }
    }
    (0..STUDY_DAYS)
        .map(|d| (d, active[d as usize].len(), passive[d as usize].len()))
        .collect()
}

pub fn validate(args: &ValidateArgs, inv: &Invocation) -> Result<()> {
    let loaded = args.inputs.load()?;
    let summary = cohort_summary(&loaded.cohort, &loaded.config.thresholds)?;
    let report = &loaded.load_report;
    let days = completeness(&loaded.cohort);

    let mut out = Outputs::create(&args.out, loaded.files.clone())?;
    out.write_json("load_report.json", report)?;
    out.write_json("cohort_summary.json", &summary)?;
    out.write_with("cohort_summary.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["outcome", "high_count", "high_pct", "score_mean", "score_sd"])?;
        for o in &summary.outcomes {
            w.write_record([
                o.outcome.as_str().to_string(),
                o.high_count.to_string(),
                format!("{:.1}", o.high_pct),
                format!("{:.2}", o.score_mean),
                format!("{:.2}", o.score_sd),
            ])?;
        }
        flush_csv(w)
    })?;
    out.write_with("completeness.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["day_index", "active_participants", "passive_participants"])?;
        for (d, a, p) in &days {
            w.write_record([d.to_string(), a.to_string(), p.to_string()])?;
        }
        flush_csv(w)
    })?;

    println!(
        "participants {} (female {}), age {:.1} ± {:.1}",
        summary.n, summary.female, summary.age_mean, summary.age_sd
    );
    for o in &summary.outcomes {
        println!("  {:<9} high risk {:<14} score {}", o.outcome.as_str(), o.count_cell(), o.score_cell());
    }
    println!(
        "accepted: {} participants, {} responses, {} sensor events; rejected: {}",
        report.participants_accepted,
        report.active_accepted,
        report.passive_accepted,
        report.rejected.len()
    );
    for r in report.rejected.iter().take(20) {
        println!("  {r}");
    }
    if report.rejected.len() > 20 {
        println!("  ... {} more in load_report.json", report.rejected.len() - 20);
    }
    let hash = loaded.registry.hash();
    out.finish(inv, serde_json::to_value(&loaded.config)?, Some(hash), BTreeMap::new())?;
    if !report.is_clean() {
        return Err(DataError(format!("{} input records rejected", report.rejected.len())).into());
    }
    Ok(())
}

fn coverage(dataset: &Dataset) -> Vec<f64> {
    let n = dataset.rows.len().max(1) as f64;
    (0..dataset.registry.len())
        .map(|c| dataset.rows.iter().filter(|r| r.values[c].is_some()).count() as f64 / n)
        .collect()
}

pub fn features(args: &FeaturesArgs, inv: &Invocation) -> Result<()> {
    let loaded = args.inputs.load()?;
    let dataset = loaded.dataset()?;
    let rows: Vec<&[Option<f64>]> = dataset.rows.iter().map(|r| r.values.as_slice()).collect();
    let corr = correlation_matrix(&rows)?;
    let names = dataset.registry.names();
    let cover = coverage(&dataset);

    let mut out = Outputs::create(&args.out, loaded.files.clone())?;
    out.write_with("features.csv", |buf| dataset.write_csv(buf))?;
    out.write_with("correlations.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["feature"];
        header.extend(names.iter().copied());
        w.write_record(&header)?;
        for (name, row) in names.iter().zip(&corr) {
            let mut rec = vec![name.to_string()];
            rec.extend(row.iter().map(|v| if v.is_nan() { String::new() } else { format!("{v:.6}") }));
            w.write_record(&rec)?;
        }
        flush_csv(w)
    })?;
    out.write_with("feature_coverage.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["feature", "group", "observed_fraction"])?;
        for (f, c) in dataset.registry.features.iter().zip(&cover) {
            w.write_record([f.name.as_str(), f.sensor_group.as_str(), &format!("{c:.4}")])?;
        }
        flush_csv(w)
    })?;
    println!(
        "{} participant-days from {} participants, {} features",
        dataset.rows.len(),
        dataset.users().len(),
        dataset.registry.len()
    );
    let hash = dataset.registry.hash();
    out.finish(inv, serde_json::to_value(&loaded.config)?, Some(hash), BTreeMap::new())?;
    Ok(())
}
