use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use phenoscope_core::cohort::{load_cohort, Cohort, CohortPaths, LabelThresholds, LoadReport, Outcome};
use phenoscope_core::eval::{Condition, ExperimentConfig};
use phenoscope_core::features::{build_dataset, Dataset, ExtractionConfig, FeatureRegistry};
use phenoscope_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::manifest::InputSet;
use crate::UsageError;

pub const CONFIG_VERSION: u32 = 1;

/// Run configuration file. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub v: u32,
    pub extraction: ExtractionConfig,
    pub thresholds: LabelThresholds,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            v: CONFIG_VERSION,
            extraction: ExtractionConfig::default(),
            thresholds: LabelThresholds::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CoreError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CoreError::Config(format!("{}: {e}", origin.display())))?;
        if cfg.v != CONFIG_VERSION {
            return Err(CoreError::Config(format!(
                "{}: unsupported config version {} (expected {CONFIG_VERSION})",
                origin.display(),
                cfg.v
            )));
        }
        cfg.extraction.validate()?;
        cfg.experiment.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Directory holding participants.jsonl, active.jsonl and passive.jsonl.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Participants file (overrides the one in --data).
    #[arg(long)]
    pub participants: Option<PathBuf>,
    /// Self-report responses file (overrides the one in --data).
    #[arg(long)]
    pub active: Option<PathBuf>,
    /// Passive sensor events file (overrides the one in --data).
    #[arg(long)]
    pub passive: Option<PathBuf>,
    /// Run configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Feature registry JSON (default: built-in registry).
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

/// Inputs after loading, with the digests of everything read.
pub struct Loaded {
    pub cohort: Cohort,
    pub load_report: LoadReport,
    pub config: RunConfig,
    pub registry: FeatureRegistry,
    pub files: InputSet,
}

impl Loaded {
    pub fn dataset(&self) -> Result<Dataset> {
        Ok(build_dataset(
            &self.cohort,
            &self.registry,
            &self.config.extraction,
            &self.config.thresholds,
        )?)
    }
}

impl InputArgs {
    pub fn cohort_paths(&self) -> Result<CohortPaths> {
        let base = self.data.as_ref().map(CohortPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, from_dir: Option<&PathBuf>, flag: &str| {
            explicit
                .clone()
                .or_else(|| from_dir.cloned())
                .ok_or_else(|| UsageError(format!("missing input: pass --data or --{flag}")))
        };
        Ok(CohortPaths {
            participants: pick(&self.participants, base.as_ref().map(|b| &b.participants), "participants")?,
            active: pick(&self.active, base.as_ref().map(|b| &b.active), "active")?,
            passive: pick(&self.passive, base.as_ref().map(|b| &b.passive), "passive")?,
        })
    }

    /// Config and registry only.
    pub fn settings(&self, files: &mut InputSet) -> Result<(RunConfig, FeatureRegistry)> {
        let config = match &self.config {
            Some(p) => RunConfig::parse(&files.read_string(p)?, p)?,
            None => RunConfig::default(),
        };
        let registry = match &self.registry {
            Some(p) => FeatureRegistry::from_json(&files.read_string(p)?)?,
            None => FeatureRegistry::default(),
        };
        Ok((config, registry))
    }

    pub fn load(&self) -> Result<Loaded> {
        let paths = self.cohort_paths()?;
        let mut files = InputSet::default();
        let (config, registry) = self.settings(&mut files)?;
        let (cohort, load_report) = load_cohort(&paths)?;
        for p in [&paths.participants, &paths.active, &paths.passive] {
            files.record(p)?;
        }
        if !load_report.is_clean() {
            eprintln!(
                "warning: {} input records rejected; run `phenoscope validate` for details",
                load_report.rejected.len()
            );
        }
        Ok(Loaded {
            cohort,
            load_report,
            config,
            registry,
            files,
        })
    }
}

#[derive(Args, Debug, Clone)]
pub struct ExperimentArgs {
    /// Outcomes to model (default: all).
    #[arg(long, value_delimiter = ',')]
    pub outcomes: Option<Vec<Outcome>>,
    /// Feature conditions (default: passive,active,combined).
    #[arg(long, value_delimiter = ',')]
    pub conditions: Option<Vec<Condition>>,
    /// Leave-one-subject-out repetitions.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed; every fold, repetition and outcome derives its own.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ExperimentArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(o) = &self.outcomes {
            cfg.outcomes = dedup(o);
        }
        if let Some(c) = &self.conditions {
            cfg.conditions = dedup(c);
        }
        if let Some(r) = self.reps {
            cfg.repetitions = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(())
    }
}

fn dedup<T: Copy + PartialEq>(xs: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}
