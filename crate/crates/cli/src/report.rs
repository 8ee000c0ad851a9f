use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use phenoscope_core::cohort::Outcome;
use phenoscope_core::eval::{
    accuracy_by_score_bin, default_score_bins, mean_probabilities, stars, AblationReport, BinAccuracy, Condition,
    ConditionResult, EvalReport, METRIC_NAMES,
};

use crate::manifest::{flush_csv, InputSet, Outputs};
use crate::svg::{grouped_bars, line_panels, Panel, Series};
use crate::Invocation;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `report.json` written by `evaluate`.
    #[arg(long)]
    pub report: PathBuf,
    /// `ablation.json` written by `ablate`, added to the summary.
    #[arg(long)]
    pub ablation: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn bins_of(r: &ConditionResult) -> Result<Vec<BinAccuracy>> {
    let probs = mean_probabilities(&r.probabilities);
    Ok(accuracy_by_score_bin(&probs, &r.labels, &r.scores, &default_score_bins(r.outcome))?)
}

fn bin_label(b: &BinAccuracy, last: bool) -> String {
    let close = if last { ']' } else { ')' };
    format!("[{},{}{close}", b.lo, b.hi)
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |v| format!("{v:.digits$}"))
}

fn summary_text(report: &EvalReport, bins: &BTreeMap<(Outcome, Condition), Vec<BinAccuracy>>, ablation: Option<&AblationReport>) -> String {
    let cfg = &report.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Leave-one-subject-out evaluation: {} repetitions, base seed {}, registry {}",
        cfg.repetitions,
        cfg.seed,
        &report.registry_hash[..report.registry_hash.len().min(12)]
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "Metrics (mean ± sd over repetitions)");
    let mut header = format!("{:<9} {:<9} {:>5}", "outcome", "condition", "users");
    for m in METRIC_NAMES {
        let _ = write!(header, "  {m:>17}");
    }
    let _ = writeln!(s, "{header}");
    for r in &report.results {
        let mut line = format!("{:<9} {:<9} {:>5}", r.outcome.as_str(), r.condition.as_str(), r.users.len());
        for m in METRIC_NAMES {
            let cell = r.summary.get(m).map_or("n/a".to_string(), |v| v.to_string());
            let _ = write!(line, "  {cell:>17}");
        }
        let _ = writeln!(s, "{line}");
    }

    if !report.comparisons.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Condition comparisons (Wilcoxon signed-rank on per-repetition balanced accuracy)");
        for c in &report.comparisons {
            let p = match (c.p_value, &c.note) {
                (Some(p), _) => format!("p = {p:.4} {}", stars(p)),
                (None, Some(n)) => format!("no test: {n}"),
                (None, None) => "no test".to_string(),
            };
            let _ = writeln!(
                s,
                "{:<9} {:<9} vs {:<9} {:.3} vs {:.3}  {}",
                c.outcome.as_str(),
                c.a.as_str(),
                c.b.as_str(),
                c.a_balanced_accuracy.mean,
                c.b_balanced_accuracy.mean,
                p.trim_end()
            );
        }
    }

    let _ = writeln!(s);
    let _ = writeln!(s, "Confusion matrices (repetition-averaged probabilities, threshold 0.5)");
    for r in &report.results {
        let c = &r.confusion;
        let _ = writeln!(
            s,
            "{:<9} {:<9} tp {:>3}  fn {:>3}  fp {:>3}  tn {:>3}  (total {})",
            r.outcome.as_str(),
            r.condition.as_str(),
            c.tp,
            c.fn_,
            c.fp,
            c.tn,
            c.total()
        );
    }

    let _ = writeln!(s);
    let _ = writeln!(s, "Accuracy by questionnaire score bin");
    for ((o, c), bs) in bins {
        let cells: Vec<String> = bs
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let acc = b.accuracy.map_or("n/a".to_string(), |a| format!("{a:.2}"));
                format!("{} {acc} (n={})", bin_label(b, i + 1 == bs.len()), b.n)
            })
            .collect();
        let _ = writeln!(s, "{:<9} {:<9} {}", o.as_str(), c.as_str(), cells.join("  "));
    }

    if let Some(a) = ablation {
        let _ = writeln!(s);
        let _ = writeln!(s, "Pretraining ablation (combined condition, balanced accuracy)");
        for r in &a.rows {
            let _ = writeln!(s, "{:<9} pretrained {}  no pretraining {}", r.outcome.as_str(), r.pretrained, r.no_pretraining);
        }
        let p = &a.pooled;
        let test = match (&p.test, &p.note) {
            (Some(t), _) => format!("paired t = {:.3}, p = {:.4} {}", t.t, t.p_value, stars(t.p_value)),
            (None, n) => format!("no test: {}", n.as_deref().unwrap_or("unavailable")),
        };
        let _ = writeln!(s, "{:<9} pretrained {}  no pretraining {}  {}", "pooled", p.pretrained, p.no_pretraining, test.trim_end());
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "* p < .05, ** p < .01, *** p < .001");
    s
}

pub fn run(args: &ReportArgs, inv: &Invocation) -> Result<()> {
    let mut files = InputSet::default();
    let report = EvalReport::from_json(&files.read_string(&args.report)?)?;
    let ablation: Option<AblationReport> = match &args.ablation {
        Some(p) => Some(serde_json::from_str(&files.read_string(p)?)?),
        None => None,
    };
    let mut bins = BTreeMap::new();
    for r in &report.results {
        bins.insert((r.outcome, r.condition), bins_of(r)?);
    }

    let summary = summary_text(&report, &bins, ablation.as_ref());
    let mut out = Outputs::create(&args.out, files)?;
    out.write("summary.txt", summary.as_bytes())?;
    out.write_with("modality.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["outcome", "condition", "balanced_accuracy_mean", "balanced_accuracy_sd"])?;
        for r in &report.results {
            let ba = &r.summary["balanced_accuracy"];
            w.write_record([r.outcome.as_str(), r.condition.as_str(), &format!("{:.6}", ba.mean), &format!("{:.6}", ba.sd)])?;
        }
        flush_csv(w)
    })?;
    out.write_with("metrics_table.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["outcome", "condition", "metric", "mean", "sd"])?;
        for r in &report.results {
            for m in METRIC_NAMES {
                if let Some(v) = r.summary.get(m) {
                    w.write_record([r.outcome.as_str(), r.condition.as_str(), m, &format!("{:.6}", v.mean), &format!("{:.6}", v.sd)])?;
                }
            }
        }
        flush_csv(w)
    })?;
    out.write_with("confusion.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["outcome", "condition", "tp", "tn", "fp", "fn"])?;
        for r in &report.results {
            let c = &r.confusion;
            w.write_record([
                r.outcome.as_str().to_string(),
                r.condition.as_str().to_string(),
                c.tp.to_string(),
                c.tn.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
            ])?;
        }
        flush_csv(w)
    })?;
    out.write_with("score_bins.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["outcome", "condition", "lo", "hi", "n", "accuracy"])?;
        for ((o, c), bs) in &bins {
            for b in bs {
                w.write_record([
                    o.as_str().to_string(),
                    c.as_str().to_string(),
                    b.lo.to_string(),
                    b.hi.to_string(),
                    b.n.to_string(),
                    fmt_opt(b.accuracy, 6),
                ])?;
            }
        }
        flush_csv(w)
    })?;

    if args.svg {
        let outcomes: Vec<Outcome> = report.config.outcomes.clone();
        let categories: Vec<String> = outcomes.iter().map(|o| o.as_str().to_string()).collect();
        let series: Vec<Series> = report
            .config
            .conditions
            .iter()
            .map(|&c| Series {
                name: c.as_str().to_string(),
                values: outcomes
                    .iter()
                    .map(|&o| report.result(o, c).map(|r| r.mean_balanced_accuracy()))
                    .collect(),
            })
            .collect();
        out.write("modality.svg", grouped_bars("Balanced accuracy by condition", &categories, &series).as_bytes())?;

        let condition = if report.config.conditions.contains(&Condition::Combined) {
            Condition::Combined
        } else {
            report.config.conditions[0]
        };
        let panels: Vec<Panel> = outcomes
            .iter()
            .filter_map(|&o| bins.get(&(o, condition)).map(|bs| (o, bs)))
            .map(|(o, bs)| {
                let labels = bs.iter().enumerate().map(|(i, b)| bin_label(b, i + 1 == bs.len())).collect();
                (o.as_str().to_string(), labels, bs.iter().map(|b| b.accuracy).collect())
            })
            .collect();
        let title = format!("Accuracy by score bin ({condition})");
        out.write("score_bins.svg", line_panels(&title, &panels).as_bytes())?;

        if let Some(a) = &ablation {
            let mut categories: Vec<String> = a.rows.iter().map(|r| r.outcome.as_str().to_string()).collect();
            categories.push("pooled".into());
            let arm = |name: &str, pick: &dyn Fn(usize) -> f64| Series {
                name: name.to_string(),
                values: (0..categories.len()).map(|i| Some(pick(i))).collect(),
            };
            let pre = arm("pretrained", &|i| a.rows.get(i).map_or(a.pooled.pretrained.mean, |r| r.pretrained.mean));
            let base = arm("no pretraining", &|i| a.rows.get(i).map_or(a.pooled.no_pretraining.mean, |r| r.no_pretraining.mean));
            out.write("ablation.svg", grouped_bars("Pretraining ablation", &categories, &[pre, base]).as_bytes())?;
        }
    }

    print!("{summary}");
    let config = serde_json::to_value(&report.config)?;
    let seeds = BTreeMap::from([("base".to_string(), report.config.seed)]);
    out.finish(inv, config, Some(report.registry_hash.clone()), seeds)?;
    Ok(())
}
