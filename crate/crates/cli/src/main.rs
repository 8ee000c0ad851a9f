//! `phenoscope`: synthesize cohorts, extract features, run leave-one-subject-out
//! evaluations, attribute predictions and render report tables.

mod data;
mod evaluate;
mod explain;
mod inputs;
mod manifest;
mod report;
mod rerun;
mod svg;
mod synth;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phenoscope_core::Error as CoreError;

#[derive(Parser, Debug)]
#[command(name = "phenoscope", version, about = "Digital-phenotyping pipeline for smartphone self-report and sensor data")]
pub struct Cli {
    /// Worker threads for folds, repetitions and attribution (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort with planted risk/behavior couplings.
    Synth(synth::SynthArgs),
    /// Load and validate input files; exits 2 if any record is rejected.
    Validate(data::ValidateArgs),
    /// Extract the per-day feature table and its correlation matrix.
    Features(data::FeaturesArgs),
    /// Repeated leave-one-subject-out evaluation per outcome and condition.
    Evaluate(evaluate::EvaluateArgs),
    /// Compare pretrained and non-pretrained models.
    Ablate(evaluate::AblateArgs),
    /// Train one model on every eligible user and save a checkpoint.
    Train(evaluate::TrainArgs),
    /// Shapley feature importance, held-out by default or for a saved model.
    Explain(explain::ExplainArgs),
    /// Summary text and plot-ready tables from an evaluation report.
    Report(report::ReportArgs),
    /// Re-execute the command recorded in a manifest into a new directory.
    Rerun(rerun::RerunArgs),
}

/// What the invocation looked like, for the manifest.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: &'static str,
    pub args: Vec<String>,
}

/// Bad flag combinations and other problems with how the tool was called.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Inputs that load but fail validation or integrity checks.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_TRAINING: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::Config(_) => (EXIT_USAGE, "config"),
                CoreError::Io { .. }
                | CoreError::InvalidInput(_)
                | CoreError::InsufficientData(_)
                | CoreError::Serde(_)
                | CoreError::Csv(_) => (EXIT_DATA, "data"),
                CoreError::Training(_) | CoreError::Degenerate(_) => (EXIT_TRAINING, "training"),
                CoreError::Shape(_) => (EXIT_INTERNAL, "internal"),
            };
        }
        if cause.is::<UsageError>() {
            return (EXIT_USAGE, "usage");
        }
        if cause.is::<DataError>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return (EXIT_DATA, "data");
        }
    }
    (EXIT_INTERNAL, "internal")
}

/// Error chain joined with ": ", skipping causes already quoted by their parent.
fn chain_message(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn report_error(code: u8, kind: &str, message: &str) -> ExitCode {
    let json = serde_json::json!({ "error": kind, "exit_code": code, "message": message });
    eprintln!("{json}");
    ExitCode::from(code)
}

fn execute(cli: Cli, args: Vec<String>) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        // Fails only if a pool already exists, which happens on `rerun`; the
        // first setting stands.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let inv = |command| Invocation {
        command,
        args: args.clone(),
    };
    match cli.command {
        Command::Synth(a) => synth::run(&a, &inv("synth")),
        Command::Validate(a) => data::validate(&a, &inv("validate")),
        Command::Features(a) => data::features(&a, &inv("features")),
        Command::Evaluate(a) => evaluate::evaluate(&a, &inv("evaluate")),
        Command::Ablate(a) => evaluate::ablate(&a, &inv("ablate")),
        Command::Train(a) => evaluate::train(&a, &inv("train")),
        Command::Explain(a) => explain::run(&a, &inv("explain")),
        Command::Report(a) => report::run(&a, &inv("report")),
        Command::Rerun(a) => rerun::run(&a),
    }
}

/// Parses `args` (without the program name) and runs the command.
pub fn dispatch(args: Vec<String>) -> anyhow::Result<()> {
    let argv = std::iter::once("phenoscope".to_string()).chain(args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| UsageError(e.to_string().trim_end().to_string()))?;
    execute(cli, args)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let argv = std::iter::once("phenoscope".to_string()).chain(args.iter().cloned());
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report_error(EXIT_USAGE, "usage", e.to_string().trim_end()),
    };
    match execute(cli, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            report_error(code, kind, &chain_message(&err))
        }
    }
}
