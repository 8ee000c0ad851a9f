//! Participant-day feature rows with cumulative-median aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExtractionConfig;
use super::geo::{infer_home, location_day_features, LocPoint};
use super::registry::{canonical_specs, FeatureRegistry, SensorGroup};
use super::sensors::{
    app_usage_features, battery_features, light_like_features, noise_features, self_app_features,
    step_features, AppSession, BatteryReading, Instant, TimedValue,
};
use super::stats::median;
use crate::cohort::{
    ActiveResponse, Cohort, LabelThresholds, PassiveEvent, Outcome, Participant, Payload, Platform, RiskLabels, STUDY_DAYS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayFeatureRow {
    pub participant_id: String,
    pub day_index: u32,
    /// Aligned with the registry; `None` is missing.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantMeta {
    pub participant_id: String,
    pub platform: Platform,
    pub labels: RiskLabels,
    pub sdq_total: u32,
    pub sci_total: u32,
    pub si_frequency: u32,
    pub ed15_mean: f64,
}

impl ParticipantMeta {
    fn from_participant(p: &Participant, thresholds: &LabelThresholds) -> Self {
        Self {
            participant_id: p.participant_id.clone(),
            platform: p.platform,
            labels: p.labels(thresholds),
            sdq_total: p.sdq_total,
            sci_total: p.sci_total,
            si_frequency: p.si_frequency,
            ed15_mean: p.ed15_mean,
        }
    }

    /// Raw questionnaire score behind `outcome`.
    pub fn score(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Sdq => self.sdq_total as f64,
            Outcome::Insomnia => self.sci_total as f64,
            Outcome::Suicidal => self.si_frequency as f64,
            Outcome::Eating => self.ed15_mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub registry: FeatureRegistry,
    /// Sorted by participant id, then day index.
    pub rows: Vec<DayFeatureRow>,
    /// Every participant of the cohort, sorted by id, including those without rows.
    pub participants: Vec<ParticipantMeta>,
}

impl Dataset {
    /// Participants that contribute at least one row, sorted.
    pub fn users(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.participant_id.as_str()).collect();
        set.into_iter().collect()
    }

    pub fn meta(&self, participant_id: &str) -> Option<&ParticipantMeta> {
        self.participants
            .binary_search_by(|m| m.participant_id.as_str().cmp(participant_id))
            .ok()
            .map(|i| &self.participants[i])
    }

    pub fn label(&self, participant_id: &str, outcome: Outcome) -> Option<bool> {
        self.meta(participant_id).map(|m| m.labels.get(outcome))
    }

    /// Same dataset with every participant's labels replaced via `f`.
    pub fn relabel(&self, f: impl Fn(&ParticipantMeta) -> RiskLabels) -> Self {
        let mut out = self.clone();
        for m in &mut out.participants {
            m.labels = f(m);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["participant_id".to_string(), "day_index".to_string()];
        header.extend(self.registry.features.iter().map(|f| f.name.clone()));
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.participant_id.clone(), row.day_index.to_string()];
            rec.extend(row.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<features csv>", e))
    }
}

/// Median of all non-missing values at or before each position; missing until
/// the first observation.
pub fn cumulative_median(series: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut seen: Vec<f64> = Vec::with_capacity(series.len());
    series
        .iter()
        .map(|v| {
            if let Some(x) = v {
                let at = seen.partition_point(|&s| s < *x);
                seen.insert(at, *x);
            }
            median(&seen)
        })
        .collect()
}

#[derive(Default)]
struct DayBucket {
    any: bool,
    active: [Option<f64>; 13],
    steps: Option<u32>,
    light: Vec<TimedValue>,
    noise: Vec<TimedValue>,
    brightness: Vec<TimedValue>,
    battery: Vec<BatteryReading>,
    apps: Vec<AppSession>,
    self_app: Vec<Instant>,
    location: Vec<LocPoint>,
}

fn participant_rows(
    p: &Participant,
    start: chrono::NaiveDate,
    active: &[&ActiveResponse],
    passive: &[&PassiveEvent],
    config: &ExtractionConfig,
) -> Vec<(u32, Vec<Option<f64>>)> {
    let mut days: Vec<DayBucket> = (0..STUDY_DAYS).map(|_| DayBucket::default()).collect();
    let id = p.participant_id.as_str();

    for r in active {
        if let Some(d) = Cohort::day_index(start, r.date) {
            let b = &mut days[d as usize];
            b.any = true;
            b.active[r.question.index()] = Some(r.value as f64);
        }
    }
    for e in passive {
        let Some(d) = Cohort::day_index(start, e.local_date()) else {
            continue;
        };
        let b = &mut days[d as usize];
        b.any = true;
        let time = e.local_time();
        match &e.payload {
            Payload::Location { lat, lon } => b.location.push(LocPoint {
                time,
                lat: *lat,
                lon: *lon,
            }),
            Payload::Steps { count, .. } => b.steps = Some(b.steps.map_or(*count, |c| c.max(*count))),
            Payload::Battery { level_pct, charging } => b.battery.push(BatteryReading {
                time,
                level: *level_pct,
                charging: *charging,
            }),
            Payload::AppUsage {
                app_id, duration_s, ..
            } => b.apps.push(AppSession {
                app_id: app_id.clone(),
                start: time,
                duration_s: *duration_s,
            }),
            Payload::AmbientLight { lux } => b.light.push(TimedValue { time, value: *lux }),
            Payload::Noise { db } => b.noise.push(TimedValue { time, value: *db }),
            Payload::ScreenBrightness { level } => b.brightness.push(TimedValue { time, value: *level }),
            Payload::SelfApp { .. } => b.self_app.push(time),
        }
    }

    let supplied_home = config.homes.get(id).copied();
    let mut seen_points: Vec<LocPoint> = Vec::new();
    let mut raw: Vec<Option<Vec<Option<f64>>>> = Vec::with_capacity(days.len());
    for b in &days {
        // Home only ever uses points up to the current day.
        seen_points.extend_from_slice(&b.location);
        if !b.any {
            raw.push(None);
            continue;
        }
        let home = supplied_home.or_else(|| infer_home(&seen_points, config));
        let mut v: Vec<Option<f64>> = Vec::with_capacity(97);
        v.extend_from_slice(&b.active);
        v.extend(light_like_features(&b.light, config));
        v.extend(app_usage_features(&b.apps, config));
        v.extend(noise_features(&b.noise, config));
        v.extend(battery_features(&b.battery, config));
        v.extend(location_day_features(&b.location, home, config));
        v.extend(self_app_features(&b.self_app, config));
        v.extend(light_like_features(&b.brightness, config));
        match b.steps {
            Some(c) => v.extend(step_features(c, config).map(Some)),
            None => v.extend([None; 4]),
        }
        raw.push(Some(v));
    }

    let width = canonical_specs().len();
    let mut aggregated: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(width); raw.len()];
    for j in 0..width {
        let series: Vec<Option<f64>> = raw.iter().map(|d| d.as_ref().and_then(|v| v[j])).collect();
        for (d, m) in cumulative_median(&series).into_iter().enumerate() {
            aggregated[d].push(m);
        }
    }
    raw.iter()
        .zip(aggregated)
        .enumerate()
        .filter(|(_, (r, _))| r.is_some())
        .map(|(d, (_, v))| (d as u32, v))
        .collect()
}

/// Extracts every participant-day with any data, aggregating each feature by
/// its cumulative median over the participant's days so far.
pub fn build_dataset(
    cohort: &Cohort,
    registry: &FeatureRegistry,
    config: &ExtractionConfig,
    thresholds: &LabelThresholds,
) -> Result<Dataset> {
    config.validate()?;
    let indices = registry.extractor_indices()?;
    let starts = cohort.study_starts();

    let mut participants: Vec<&Participant> = cohort.participants.iter().collect();
    participants.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
    let mut active: BTreeMap<&str, Vec<&ActiveResponse>> = BTreeMap::new();
    for r in &cohort.active {
        active.entry(r.participant_id.as_str()).or_default().push(r);
    }
    let mut passive: BTreeMap<&str, Vec<&PassiveEvent>> = BTreeMap::new();
    for e in &cohort.passive {
        passive.entry(e.participant_id.as_str()).or_default().push(e);
    }

    let per_user: Vec<Vec<DayFeatureRow>> = participants
        .par_iter()
        .map(|p| {
            let Some(&start) = starts.get(&p.participant_id) else {
                return Vec::new();
            };
            let id = p.participant_id.as_str();
            let a = active.get(id).map(Vec::as_slice).unwrap_or_default();
            let e = passive.get(id).map(Vec::as_slice).unwrap_or_default();
            participant_rows(p, start, a, e, config)
                .into_iter()
                .map(|(day_index, canon)| DayFeatureRow {
                    participant_id: p.participant_id.clone(),
                    day_index,
                    values: indices.iter().map(|&i| canon[i]).collect(),
                })
                .collect()
        })
        .collect();

    Ok(Dataset {
        registry: registry.clone(),
        rows: per_user.into_iter().flatten().collect(),
        participants: participants
            .iter()
            .map(|p| ParticipantMeta::from_participant(p, thresholds))
            .collect(),
    })
}

/// Column indices whose sensor group satisfies `keep`.
pub fn columns_where(registry: &FeatureRegistry, keep: impl Fn(SensorGroup) -> bool) -> Vec<usize> {
    registry
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| keep(f.sensor_group))
        .map(|(i, _)| i)
        .collect()
}

/// Per-user count of rows, keyed by participant.
pub fn rows_per_user(rows: &[DayFeatureRow]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(r.participant_id.as_str()).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_median_examples() {
        let s = |v: &[Option<f64>]| cumulative_median(v);
        assert_eq!(
            s(&[Some(3.0), Some(9.0), Some(6.0)]),
            vec![Some(3.0), Some(6.0), Some(6.0)]
        );
        assert_eq!(s(&[Some(5.0)]), vec![Some(5.0)]);
        assert_eq!(
            s(&[Some(4.0), None, Some(10.0), Some(2.0)]),
            vec![Some(4.0), Some(4.0), Some(7.0), Some(4.0)]
        );
        assert_eq!(s(&[None, Some(1.0)]), vec![None, Some(1.0)]);
    }
}
