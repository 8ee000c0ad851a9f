use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;

use crate::manifest::{file_digest, Manifest};
use crate::{dispatch, DataError, UsageError};

#[derive(Args, Debug)]
pub struct RerunArgs {
    /// `manifest.json` of the output directory to reproduce.
    #[arg(long)]
    pub manifest: PathBuf,
    /// New output directory; must differ from the original.
    #[arg(long)]
    pub out: PathBuf,
}

/// Recorded arguments with every `--out` replaced by `out`.
fn retarget(args: &[String], out: &Path) -> Vec<String> {
    let mut kept = Vec::with_capacity(args.len() + 2);
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
        } else if !a.starts_with("--out=") {
            kept.push(a.clone());
        }
    }
    kept.push("--out".to_string());
    kept.push(out.display().to_string());
    kept
}

pub fn run(args: &RerunArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    if manifest.command == "rerun" || manifest.args.first().map(String::as_str) == Some("rerun") {
        return Err(UsageError("manifest records a rerun; point at the original manifest".into()).into());
    }
    if let Some(dir) = args.manifest.parent() {
        if dir.canonicalize().ok().is_some_and(|d| Some(d) == args.out.canonicalize().ok()) {
            return Err(UsageError("--out must differ from the manifest's directory".into()).into());
        }
    }
    for (path, expected) in &manifest.inputs {
        let actual = file_digest(Path::new(path))?;
        if &actual != expected {
            return Err(DataError(format!("input {path} changed since the manifest was written")).into());
        }
    }
    let replay = retarget(&manifest.args, &args.out);
    eprintln!("rerunning: phenoscope {}", replay.join(" "));
    dispatch(replay)
}
