use std::collections::BTreeMap;

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};

use super::geo::LatLon;
use crate::error::{Error, Result};

/// Local-time interval with inclusive start and exclusive end; wraps midnight
/// when `start > end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NightWindow {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl Default for NightWindow {
    fn default() -> Self {
        Self {
            start: NaiveTime::from_hms_opt(22, 0, 0).unwrap(),
            end: NaiveTime::from_hms_opt(6, 0, 0).unwrap(),
        }
    }
}

impl NightWindow {
    pub fn contains(&self, t: NaiveTime) -> bool {
        if self.start < self.end {
            self.start <= t && t < self.end
        } else {
            t >= self.start || t < self.end
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppCategory {
    Camera,
    Communication,
    Entertainment,
    Gaming,
    PhysicalHealth,
    MentalHealth,
    /// The data-collection app itself.
    StudyApp,
    News,
    Productivity,
    SocialMedia,
}

impl AppCategory {
    pub const ALL: [AppCategory; 10] = [
        AppCategory::Camera,
        AppCategory::Communication,
        AppCategory::Entertainment,
        AppCategory::Gaming,
        AppCategory::PhysicalHealth,
        AppCategory::MentalHealth,
        AppCategory::StudyApp,
        AppCategory::News,
        AppCategory::Productivity,
        AppCategory::SocialMedia,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AppCategory::Camera => "camera",
            AppCategory::Communication => "communication",
            AppCategory::Entertainment => "entertainment",
            AppCategory::Gaming => "gaming",
            AppCategory::PhysicalHealth => "physical_health",
            AppCategory::MentalHealth => "mental_health",
            AppCategory::StudyApp => "study_app",
            AppCategory::News => "news",
            AppCategory::Productivity => "productivity",
            AppCategory::SocialMedia => "social_media",
        }
    }
}

/// App identifiers known to the default category map. The synthetic generator
/// draws from this catalog (plus a few unmapped ids).
pub const DEFAULT_APP_CATALOG: [(&str, AppCategory); 20] = [
    ("org.camera.snap", AppCategory::Camera),
    ("org.camera.pro", AppCategory::Camera),
    ("org.chat.messages", AppCategory::Communication),
    ("org.chat.whisper", AppCategory::Communication),
    ("org.mail.inbox", AppCategory::Communication),
    ("org.video.stream", AppCategory::Entertainment),
    ("org.music.tunes", AppCategory::Entertainment),
    ("org.games.blocks", AppCategory::Gaming),
    ("org.games.racer", AppCategory::Gaming),
    ("org.fit.run", AppCategory::PhysicalHealth),
    ("org.calm.breathe", AppCategory::MentalHealth),
    ("org.study.diary", AppCategory::StudyApp),
    ("org.news.daily", AppCategory::News),
    ("org.work.notes", AppCategory::Productivity),
    ("org.work.calendar", AppCategory::Productivity),
    ("org.social.feed", AppCategory::SocialMedia),
    ("org.social.clips", AppCategory::SocialMedia),
    ("org.social.photos", AppCategory::SocialMedia),
    ("org.social.forum", AppCategory::SocialMedia),
    ("org.games.puzzle", AppCategory::Gaming),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub night_window: NightWindow,
    /// Known home locations by participant; others are inferred.
    pub homes: BTreeMap<String, LatLon>,
    /// Location cells are lat/lon rounded to this many decimals.
    pub grid_decimals: u32,
    /// Points within this distance of home count as "at home".
    pub home_radius_m: f64,
    pub app_category_map: BTreeMap<String, AppCategory>,
    pub step_thresholds: [u32; 3],
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            night_window: NightWindow::default(),
            homes: BTreeMap::new(),
            grid_decimals: 3,
            home_radius_m: 200.0,
            app_category_map: DEFAULT_APP_CATALOG
                .iter()
                .map(|&(id, c)| (id.to_string(), c))
                .collect(),
            step_thresholds: [5000, 7000, 10000],
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.night_window.start == self.night_window.end {
            return Err(Error::Config("night window is empty".into()));
        }
        if !self.step_thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("step thresholds must be strictly increasing".into()));
        }
        if self.home_radius_m.is_nan() || self.home_radius_m <= 0.0 {
            return Err(Error::Config("home radius must be positive".into()));
        }
        if self.grid_decimals > 8 {
            return Err(Error::Config("grid precision above 8 decimals".into()));
        }
        Ok(())
    }
}
