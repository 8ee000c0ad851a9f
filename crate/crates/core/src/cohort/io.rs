//! Line-delimited JSON ingestion. Every line carries `"v": 1`.
//!
//! Bad lines never abort a load: they are collected in [`LoadReport`] with
//! their file and 1-based line number.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ActiveResponse, Cohort, Participant, PassiveEvent};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CohortPaths {
    pub participants: PathBuf,
    pub active: PathBuf,
    pub passive: PathBuf,
}

impl CohortPaths {
    /// `participants.jsonl`, `active.jsonl` and `passive.jsonl` inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            participants: dir.join("participants.jsonl"),
            active: dir.join("active.jsonl"),
            passive: dir.join("passive.jsonl"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Participants,
    Active,
    Passive,
}

impl fmt::Display for FileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FileKind::Participants => "participants",
            FileKind::Active => "active",
            FileKind::Passive => "passive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub file: FileKind,
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} line {}: {}", self.file, self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub participants_accepted: usize,
    pub active_accepted: usize,
    pub passive_accepted: usize,
    pub rejected: Vec<Rejection>,
}

impl LoadReport {
    pub fn is_clean(&self) -> bool {
        self.rejected.is_empty()
    }
}

#[derive(Deserialize)]
struct LineIn<T> {
    v: u32,
    #[serde(flatten)]
    record: T,
}

#[derive(Serialize)]
struct LineOut<'a, T> {
    v: u32,
    #[serde(flatten)]
    record: &'a T,
}

fn read_lines<T: DeserializeOwned>(
    path: &Path,
    file: FileKind,
    report: &mut LoadReport,
) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LineIn<T>>(line) {
            Ok(rec) if rec.v == SCHEMA_VERSION => out.push((line_no, rec.record)),
            Ok(rec) => report.rejected.push(Rejection {
                file,
                line: line_no,
                reason: format!("v: unsupported schema version {}", rec.v),
            }),
            Err(e) => report.rejected.push(Rejection {
                file,
                line: line_no,
                reason: format!("malformed record: {e}"),
            }),
        }
    }
    Ok(out)
}

/// Loads and validates the three ingestion files.
///
/// Only I/O failures are errors; invalid records are skipped and listed in the report.
pub fn load_cohort(paths: &CohortPaths) -> Result<(Cohort, LoadReport)> {
    let mut report = LoadReport::default();

    let mut participants: Vec<Participant> = Vec::new();
    let mut seen_ids = HashSet::new();
    for (line, p) in read_lines::<Participant>(&paths.participants, FileKind::Participants, &mut report)? {
        let reason = if let Err(r) = p.validate() {
            Some(r)
        } else if !seen_ids.insert(p.participant_id.clone()) {
            Some(format!("participant_id: duplicate `{}`", p.participant_id))
        } else {
            None
        };
        match reason {
            Some(reason) => report.rejected.push(Rejection {
                file: FileKind::Participants,
                line,
                reason,
            }),
            None => participants.push(p),
        }
    }
    let by_id: HashMap<&str, &Participant> = participants
        .iter()
        .map(|p| (p.participant_id.as_str(), p))
        .collect();

    let mut active: Vec<(usize, ActiveResponse)> = Vec::new();
    let mut seen_keys = HashSet::new();
    for (line, r) in read_lines::<ActiveResponse>(&paths.active, FileKind::Active, &mut report)? {
        let reason = if !by_id.contains_key(r.participant_id.as_str()) {
            Some(format!("participant_id: unknown `{}`", r.participant_id))
        } else if !(1..=7).contains(&r.value) {
            Some(format!("value: {} outside 1..=7", r.value))
        } else if !seen_keys.insert((r.participant_id.clone(), r.date, r.question)) {
            Some(format!(
                "duplicate response for ({}, {}, {})",
                r.participant_id,
                r.date,
                r.question.as_str()
            ))
        } else {
            None
        };
        match reason {
            Some(reason) => report.rejected.push(Rejection {
                file: FileKind::Active,
                line,
                reason,
            }),
            None => active.push((line, r)),
        }
    }

    let mut passive: Vec<(usize, PassiveEvent)> = Vec::new();
    for (line, e) in read_lines::<PassiveEvent>(&paths.passive, FileKind::Passive, &mut report)? {
        let reason = match by_id.get(e.participant_id.as_str()) {
            None => Some(format!("participant_id: unknown `{}`", e.participant_id)),
            Some(p) => {
                let kind = e.payload.kind();
                if !kind.available_on(p.platform) {
                    Some(format!("kind: {} not available on {:?}", kind.as_str(), p.platform))
                } else if !p.enabled_sensors.contains(&kind) {
                    Some(format!("kind: {} not enabled for participant", kind.as_str()))
                } else {
                    e.payload.validate().err()
                }
            }
        };
        match reason {
            Some(reason) => report.rejected.push(Rejection {
                file: FileKind::Passive,
                line,
                reason,
            }),
            None => passive.push((line, e)),
        }
    }

    // Study windows come from accepted records only.
    let draft = Cohort {
        participants: participants.clone(),
        active: active.iter().map(|(_, r)| r.clone()).collect(),
        passive: passive.iter().map(|(_, e)| e.clone()).collect(),
    };
    let starts: BTreeMap<String, chrono::NaiveDate> = draft.study_starts();
    drop(draft);

    let mut cohort = Cohort {
        participants,
        active: Vec::with_capacity(active.len()),
        passive: Vec::with_capacity(passive.len()),
    };
    for (line, r) in active {
        let start = starts[&r.participant_id];
        if Cohort::day_index(start, r.date).is_some() {
            cohort.active.push(r);
        } else {
            report.rejected.push(Rejection {
                file: FileKind::Active,
                line,
                reason: format!("date: {} outside study window starting {start}", r.date),
            });
        }
    }
    for (line, e) in passive {
        let start = starts[&e.participant_id];
        let date = e.local_date();
        if Cohort::day_index(start, date).is_some() {
            cohort.passive.push(e);
        } else {
            report.rejected.push(Rejection {
                file: FileKind::Passive,
                line,
                reason: format!("timestamp: {date} outside study window starting {start}"),
            });
        }
    }

    report.rejected.sort_by_key(|r| (r.file as u8, r.line));
    report.participants_accepted = cohort.participants.len();
    report.active_accepted = cohort.active.len();
    report.passive_accepted = cohort.passive.len();
    Ok((cohort, report))
}

fn write_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(
            &mut w,
            &LineOut {
                v: SCHEMA_VERSION,
                record: rec,
            },
        )?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_cohort(cohort: &Cohort, paths: &CohortPaths) -> Result<()> {
    write_lines(&paths.participants, &cohort.participants)?;
    write_lines(&paths.active, &cohort.active)?;
    write_lines(&paths.passive, &cohort.passive)
}
