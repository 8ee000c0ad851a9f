//! Participants, self-report responses and passive sensor events.
//!
//! A [`Cohort`] is immutable once loaded. All downstream stages borrow it.

mod io;
mod labels;
mod summary;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

pub use io::{load_cohort, write_cohort, CohortPaths, FileKind, LoadReport, Rejection, SCHEMA_VERSION};
pub use labels::{label_eating, label_insomnia, label_sdq, label_suicidal, LabelThresholds, Outcome, RiskLabels};
pub use summary::{cohort_summary, CohortSummary, OutcomeSummary};

/// Length of the observation window for every participant, in days.
pub const STUDY_DAYS: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Location,
    Steps,
    Battery,
    AppUsage,
    AmbientLight,
    Noise,
    ScreenBrightness,
    SelfApp,
}

impl SensorKind {
    pub const ALL: [SensorKind; 8] = [
        SensorKind::Location,
        SensorKind::Steps,
        SensorKind::Battery,
        SensorKind::AppUsage,
        SensorKind::AmbientLight,
        SensorKind::Noise,
        SensorKind::ScreenBrightness,
        SensorKind::SelfApp,
    ];

    /// Ambient light, app usage and noise are Android-only; screen brightness is iOS-only.
    pub fn available_on(self, platform: Platform) -> bool {
        match self {
            SensorKind::AmbientLight | SensorKind::AppUsage | SensorKind::Noise => {
                platform == Platform::Android
            }
            SensorKind::ScreenBrightness => platform == Platform::Ios,
            _ => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Location => "location",
            SensorKind::Steps => "steps",
            SensorKind::Battery => "battery",
            SensorKind::AppUsage => "app_usage",
            SensorKind::AmbientLight => "ambient_light",
            SensorKind::Noise => "noise",
            SensorKind::ScreenBrightness => "screen_brightness",
            SensorKind::SelfApp => "self_app",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Ios,
    Android,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub participant_id: String,
    pub age_years: f64,
    pub gender: Gender,
    pub platform: Platform,
    pub sdq_total: u32,
    pub sci_total: u32,
    pub si_frequency: u32,
    pub ed15_mean: f64,
    pub enabled_sensors: BTreeSet<SensorKind>,
    /// First day of the observation window. Inferred from the earliest record when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study_start: Option<NaiveDate>,
}

impl Participant {
    pub fn labels(&self, thresholds: &LabelThresholds) -> RiskLabels {
        RiskLabels::from_scores(
            self.sdq_total,
            self.sci_total,
            self.si_frequency,
            self.ed15_mean,
            thresholds,
        )
    }

    /// Checks score ranges and sensor/platform consistency.
    pub fn validate(&self) -> Result<(), String> {
        if self.participant_id.is_empty() {
            return Err("participant_id: empty".into());
        }
        if self.sdq_total > 40 {
            return Err(format!("sdq_total: {} outside 0..=40", self.sdq_total));
        }
        if self.sci_total > 32 {
            return Err(format!("sci_total: {} outside 0..=32", self.sci_total));
        }
        if self.si_frequency > 3 {
            return Err(format!("si_frequency: {} outside 0..=3", self.si_frequency));
        }
        if !(0.0..=6.0).contains(&self.ed15_mean) {
            return Err(format!("ed15_mean: {} outside 0..=6", self.ed15_mean));
        }
        if !self.age_years.is_finite() || self.age_years < 0.0 {
            return Err(format!("age_years: {} invalid", self.age_years));
        }
        if let Some(s) = self
            .enabled_sensors
            .iter()
            .find(|s| !s.available_on(self.platform))
        {
            return Err(format!(
                "enabled_sensors: {} not available on {:?}",
                s.as_str(),
                self.platform
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Question {
    Mood,
    SleepQuality,
    Loneliness,
    Confidence,
    Motivation,
    Productivity,
    Energy,
    Sociability,
    SelfCare,
    Hopefulness,
    NegativeThinking,
    RacingThoughts,
    Irritability,
}

impl Question {
    pub const ALL: [Question; 13] = [
        Question::Mood,
        Question::SleepQuality,
        Question::Loneliness,
        Question::Confidence,
        Question::Motivation,
        Question::Productivity,
        Question::Energy,
        Question::Sociability,
        Question::SelfCare,
        Question::Hopefulness,
        Question::NegativeThinking,
        Question::RacingThoughts,
        Question::Irritability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Question::Mood => "mood",
            Question::SleepQuality => "sleep_quality",
            Question::Loneliness => "loneliness",
            Question::Confidence => "confidence",
            Question::Motivation => "motivation",
            Question::Productivity => "productivity",
            Question::Energy => "energy",
            Question::Sociability => "sociability",
            Question::SelfCare => "self_care",
            Question::Hopefulness => "hopefulness",
            Question::NegativeThinking => "negative_thinking",
            Question::RacingThoughts => "racing_thoughts",
            Question::Irritability => "irritability",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveResponse {
    pub participant_id: String,
    pub date: NaiveDate,
    pub question: Question,
    pub value: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Location {
        lat: f64,
        lon: f64,
    },
    Steps {
        date: NaiveDate,
        count: u32,
    },
    Battery {
        level_pct: f64,
        charging: bool,
    },
    AppUsage {
        app_id: String,
        start: DateTime<FixedOffset>,
        duration_s: f64,
    },
    AmbientLight {
        lux: f64,
    },
    Noise {
        db: f64,
    },
    ScreenBrightness {
        level: f64,
    },
    SelfApp {
        start: DateTime<FixedOffset>,
    },
}

impl Payload {
    pub fn kind(&self) -> SensorKind {
        match self {
            Payload::Location { .. } => SensorKind::Location,
            Payload::Steps { .. } => SensorKind::Steps,
            Payload::Battery { .. } => SensorKind::Battery,
            Payload::AppUsage { .. } => SensorKind::AppUsage,
            Payload::AmbientLight { .. } => SensorKind::AmbientLight,
            Payload::Noise { .. } => SensorKind::Noise,
            Payload::ScreenBrightness { .. } => SensorKind::ScreenBrightness,
            Payload::SelfApp { .. } => SensorKind::SelfApp,
        }
    }

    fn validate(&self) -> Result<(), String> {
        let bad = |field: &str, v: f64| Err(format!("{field}: {v} out of range"));
        match *self {
            Payload::Location { lat, lon } => {
                if !(-90.0..=90.0).contains(&lat) {
                    return bad("lat", lat);
                }
                if !(-180.0..=180.0).contains(&lon) {
                    return bad("lon", lon);
                }
            }
            Payload::Battery { level_pct, .. } if !(0.0..=100.0).contains(&level_pct) => {
                return bad("level_pct", level_pct)
            }
            Payload::AppUsage { duration_s, .. } if !(duration_s >= 0.0 && duration_s.is_finite()) => {
                return bad("duration_s", duration_s)
            }
            Payload::AmbientLight { lux } if !(lux >= 0.0 && lux.is_finite()) => return bad("lux", lux),
            Payload::Noise { db } if !db.is_finite() => return bad("db", db),
            Payload::ScreenBrightness { level } if !(0.0..=1.0).contains(&level) => {
                return bad("level", level)
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassiveEvent {
    pub participant_id: String,
    pub timestamp: DateTime<FixedOffset>,
    #[serde(flatten)]
    pub payload: Payload,
}

impl PassiveEvent {
    /// Local wall-clock instant used for day and night assignment: the session
    /// start for usage sessions, the record timestamp otherwise.
    pub fn local_time(&self) -> DateTime<FixedOffset> {
        match &self.payload {
            Payload::AppUsage { start, .. } | Payload::SelfApp { start } => *start,
            _ => self.timestamp,
        }
    }

    /// Calendar day the event is attributed to.
    pub fn local_date(&self) -> NaiveDate {
        match &self.payload {
            Payload::Steps { date, .. } => *date,
            _ => self.local_time().date_naive(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cohort {
    pub participants: Vec<Participant>,
    pub active: Vec<ActiveResponse>,
    pub passive: Vec<PassiveEvent>,
}

impl Cohort {
    pub fn participant(&self, id: &str) -> Option<&Participant> {
        self.participants.iter().find(|p| p.participant_id == id)
    }

    /// First study day per participant: explicit `study_start`, else the
    /// earliest dated record, else absent (participant has no data).
    pub fn study_starts(&self) -> BTreeMap<String, NaiveDate> {
        let mut earliest: BTreeMap<&str, NaiveDate> = BTreeMap::new();
        let dated = self
            .active
            .iter()
            .map(|r| (r.participant_id.as_str(), r.date))
            .chain(self.passive.iter().map(|e| (e.participant_id.as_str(), e.local_date())));
        for (id, d) in dated {
            earliest.entry(id).and_modify(|e| *e = (*e).min(d)).or_insert(d);
        }
        self.participants
            .iter()
            .filter_map(|p| {
                p.study_start
                    .or_else(|| earliest.get(p.participant_id.as_str()).copied())
                    .map(|d| (p.participant_id.clone(), d))
            })
            .collect()
    }

    /// Day index of `date` within the participant's window, if inside it.
    pub fn day_index(start: NaiveDate, date: NaiveDate) -> Option<u32> {
        let d = (date - start).num_days();
        (0..STUDY_DAYS as i64).contains(&d).then_some(d as u32)
    }
}
