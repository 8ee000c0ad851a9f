use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Invocation, UsageError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Everything needed to reproduce an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub tool_version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    /// Effective configuration after flags were applied.
    pub config: serde_json::Value,
    pub registry_hash: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    /// SHA-256 of every file read, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every file written, keyed by file name.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.version != MANIFEST_VERSION {
            return Err(UsageError(format!("unsupported manifest version {}", m.version)).into());
        }
        Ok(m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Finishes a CSV writer over an in-memory buffer.
pub fn flush_csv(w: csv::Writer<&mut Vec<u8>>) -> phenoscope_core::Result<()> {
    w.into_inner()
        .map(drop)
        .map_err(|e| phenoscope_core::Error::io("<csv buffer>", e.into_error()))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Files read by a command, with their digests.
#[derive(Debug, Clone, Default)]
pub struct InputSet {
    digests: BTreeMap<String, String>,
    canonical: Vec<PathBuf>,
}

impl InputSet {
    /// Reads `path` and records its digest.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| phenoscope_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.digests.insert(path.display().to_string(), sha256_hex(&bytes));
        if let Ok(c) = path.canonicalize() {
            self.canonical.push(c);
        }
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String> {
        String::from_utf8(self.read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    /// Records a file that a library call reads on its own.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        self.read(path).map(drop)
    }
}

/// An output directory being filled by one command.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    inputs: InputSet,
    artifacts: BTreeMap<String, String>,
}

impl Outputs {
    pub fn create(dir: &Path, inputs: InputSet) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| phenoscope_core::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            inputs,
            artifacts: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` inside the output directory. Refuses to replace an input.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        self.check_writable(name)?;
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| phenoscope_core::Error::Io {
            path: path.clone(),
            source: e,
        })?;
        self.artifacts.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    /// Records a file that a library call wrote into the output directory.
    pub fn adopt(&mut self, name: &str) -> Result<()> {
        let digest = file_digest(&self.dir.join(name))?;
        self.artifacts.insert(name.to_string(), digest);
        Ok(())
    }

    /// Fails if writing `name` would replace an input.
    pub fn check_writable(&self, name: &str) -> Result<()> {
        if let Ok(c) = self.dir.join(name).canonicalize() {
            if self.inputs.canonical.contains(&c) {
                return Err(UsageError(format!("refusing to overwrite input file {}", c.display())).into());
            }
        }
        Ok(())
    }

    /// Writes whatever `fill` produces into `name`.
    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> phenoscope_core::Result<()>,
    ) -> Result<PathBuf> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes the manifest last, so it lists every artifact.
    pub fn finish(
        self,
        inv: &Invocation,
        config: serde_json::Value,
        registry_hash: Option<String>,
        seeds: BTreeMap<String, u64>,
    ) -> Result<Manifest> {
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: inv.command.to_string(),
            args: inv.args.clone(),
            config,
            registry_hash,
            seeds,
            inputs: self.inputs.digests,
            artifacts: self.artifacts,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| phenoscope_core::Error::Io { path, source: e })?;
        Ok(manifest)
    }
}
