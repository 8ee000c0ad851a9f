use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use phenoscope_core::cohort::{write_cohort, CohortPaths};
use phenoscope_core::synth::{generate, GeneratorConfig};
use phenoscope_core::Error as CoreError;

use crate::manifest::{InputSet, Outputs};
use crate::Invocation;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Built-in generator settings: default, borderline or null.
    #[arg(long, default_value = "default", conflicts_with = "config")]
    pub preset: String,
    /// Generator configuration JSON (fields not given keep their defaults).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of participants.
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the cohort files, ground truth and manifest.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs, inv: &Invocation) -> Result<()> {
    let mut files = InputSet::default();
    let mut config = match &args.config {
        Some(p) => {
            let text = files.read_string(p)?;
            serde_json::from_str::<GeneratorConfig>(&text)
                .map_err(|e| CoreError::Config(format!("{}: {e}", p.display())))?
        }
        None => GeneratorConfig::preset(&args.preset)?,
    };
    if let Some(n) = args.users {
        config.n_users = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.validate()?;
    let (cohort, truth) = generate(&config)?;

    let mut out = Outputs::create(&args.out, files)?;
    let names = ["participants.jsonl", "active.jsonl", "passive.jsonl"];
    for n in names {
        out.check_writable(n)?;
    }
    write_cohort(&cohort, &CohortPaths::in_dir(out.dir()))?;
    for n in names {
        out.adopt(n)?;
    }
    out.write_json("ground_truth.json", &truth)?;
    eprintln!(
        "synthesized {} participants, {} responses, {} sensor events into {}",
        cohort.participants.len(),
        cohort.active.len(),
        cohort.passive.len(),
        args.out.display()
    );
    let seeds = BTreeMap::from([("generator".to_string(), config.seed)]);
    out.finish(inv, serde_json::to_value(&config)?, None, seeds)?;
    Ok(())
}
