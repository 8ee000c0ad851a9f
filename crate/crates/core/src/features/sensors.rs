//! Per-day extractors for step, app-usage, battery and scalar sensor streams.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, FixedOffset, Timelike};

use super::config::{AppCategory, ExtractionConfig};
use super::stats::{median, stat_block};

pub type Instant = DateTime<FixedOffset>;

/// Splits `events` into (day, night) by the local wall-clock time of each event.
pub fn night_partition<T: Clone>(
    events: &[T],
    time_of: impl Fn(&T) -> Instant,
    config: &ExtractionConfig,
) -> (Vec<T>, Vec<T>) {
    events
        .iter()
        .cloned()
        .partition(|e| !config.night_window.contains(time_of(e).time()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedValue {
    pub time: Instant,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppSession {
    pub app_id: String,
    pub start: Instant,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryReading {
    pub time: Instant,
    pub level: f64,
    pub charging: bool,
}

pub const STEP_FEATURES: [&str; 4] = ["count", "gt_5k", "gt_7k", "gt_10k"];

/// Daily count plus strict `>` indicators for each configured threshold.
pub fn step_features(count: u32, config: &ExtractionConfig) -> [f64; 4] {
    let [a, b, c] = config.step_thresholds;
    let ind = |t: u32| if count > t { 1.0 } else { 0.0 };
    [count as f64, ind(a), ind(b), ind(c)]
}

pub const LIGHT_FEATURES: [&str; 8] = [
    "day_total",
    "day_mean",
    "day_median",
    "day_sd",
    "night_total",
    "night_mean",
    "night_median",
    "night_sd",
];

/// Total/mean/median/SD over the day and night partitions. Used for ambient
/// light and screen brightness.
pub fn light_like_features(readings: &[TimedValue], config: &ExtractionConfig) -> [Option<f64>; 8] {
    let (day, night) = night_partition(readings, |r| r.time, config);
    let block = |part: &[TimedValue]| {
        let v: Vec<f64> = part.iter().map(|r| r.value).collect();
        match stat_block(&v) {
            Some(s) => [Some(s.total), Some(s.mean), Some(s.median), Some(s.sd)],
            None => [None; 4],
        }
    };
    let (d, n) = (block(&day), block(&night));
    [d[0], d[1], d[2], d[3], n[0], n[1], n[2], n[3]]
}

pub const NOISE_FEATURES: [&str; 10] = [
    "day_total",
    "day_median",
    "day_mean",
    "day_max",
    "day_sd",
    "night_total",
    "night_median",
    "night_mean",
    "night_max",
    "night_sd",
];

pub fn noise_features(readings: &[TimedValue], config: &ExtractionConfig) -> [Option<f64>; 10] {
    let (day, night) = night_partition(readings, |r| r.time, config);
    let block = |part: &[TimedValue]| {
        let v: Vec<f64> = part.iter().map(|r| r.value).collect();
        match stat_block(&v) {
            Some(s) => [Some(s.total), Some(s.median), Some(s.mean), Some(s.max), Some(s.sd)],
            None => [None; 5],
        }
    };
    let (d, n) = (block(&day), block(&night));
    [d[0], d[1], d[2], d[3], d[4], n[0], n[1], n[2], n[3], n[4]]
}

pub const SELF_APP_FEATURES: [&str; 3] = ["first_hour", "last_hour", "night_count"];

/// First and last local hour of use and number of night-time sessions.
pub fn self_app_features(starts: &[Instant], config: &ExtractionConfig) -> [Option<f64>; 3] {
    if starts.is_empty() {
        return [None; 3];
    }
    let hours = starts.iter().map(|t| t.hour());
    let first = hours.clone().min().map(f64::from);
    let last = hours.max().map(f64::from);
    let night = starts
        .iter()
        .filter(|t| config.night_window.contains(t.time()))
        .count();
    [first, last, Some(night as f64)]
}

pub const BATTERY_FEATURES: [&str; 8] = [
    "min",
    "max",
    "mean",
    "median",
    "charges",
    "use_per_hour",
    "minutes_below_20",
    "night_count",
];

/// Battery statistics. Rates need at least two readings.
///
/// Discharge per hour only counts intervals whose both endpoints are not
/// charging; a charge is a not-charging → charging transition.
pub fn battery_features(readings: &[BatteryReading], config: &ExtractionConfig) -> [Option<f64>; 8] {
    if readings.is_empty() {
        return [None; 8];
    }
    let mut r = readings.to_vec();
    r.sort_by_key(|x| x.time);
    let levels: Vec<f64> = r.iter().map(|x| x.level).collect();
    let s = stat_block(&levels).expect("non-empty");

    let charges = r.windows(2).filter(|w| !w[0].charging && w[1].charging).count();
    let hours_between = |a: &BatteryReading, b: &BatteryReading| (b.time - a.time).num_milliseconds() as f64 / 3.6e6;

    let (mut drop, mut hours) = (0.0, 0.0);
    for w in r.windows(2) {
        if !w[0].charging && !w[1].charging {
            drop += (w[0].level - w[1].level).max(0.0);
            hours += hours_between(&w[0], &w[1]);
        }
    }
    let use_per_hour = (hours > 0.0).then(|| drop / hours);
    let below_20 = (r.len() >= 2).then(|| {
        r.windows(2)
            .filter(|w| w[0].level < 20.0)
            .map(|w| hours_between(&w[0], &w[1]) * 60.0)
            .sum::<f64>()
    });
    let night = r
        .iter()
        .filter(|x| config.night_window.contains(x.time.time()))
        .count();
    [
        Some(s.min),
        Some(s.max),
        Some(s.mean),
        Some(s.median),
        Some(charges as f64),
        use_per_hour,
        below_20,
        Some(night as f64),
    ]
}

pub fn app_usage_feature_names() -> Vec<String> {
    let mut names: Vec<String> = ["day", "night"]
        .iter()
        .flat_map(|p| {
            ["count", "unique", "total_s", "mean_s", "median_s"]
                .iter()
                .map(move |s| format!("{p}_{s}"))
        })
        .collect();
    names.extend(AppCategory::ALL.iter().map(|c| format!("time_{}", c.as_str())));
    names.extend(AppCategory::ALL.iter().map(|c| format!("pct_{}", c.as_str())));
    names
}

/// Thirty app-usage values: day and night usage blocks, seconds per category,
/// and each category's share of mapped time in percent. Sessions are assigned to
/// day/night by start time; unmapped apps only enter the usage blocks.
pub fn app_usage_features(sessions: &[AppSession], config: &ExtractionConfig) -> Vec<Option<f64>> {
    if sessions.is_empty() {
        return vec![None; 30];
    }
    let (day, night) = night_partition(sessions, |s| s.start, config);
    let mut out = Vec::with_capacity(30);
    for part in [&day, &night] {
        let durations: Vec<f64> = part.iter().map(|s| s.duration_s).collect();
        let unique: BTreeSet<&str> = part.iter().map(|s| s.app_id.as_str()).collect();
        let total: f64 = durations.iter().sum();
        out.push(Some(part.len() as f64));
        out.push(Some(unique.len() as f64));
        out.push(Some(total));
        out.push((!part.is_empty()).then(|| total / part.len() as f64));
        out.push(median(&durations));
    }
    let mut per_cat: BTreeMap<AppCategory, f64> = AppCategory::ALL.iter().map(|&c| (c, 0.0)).collect();
    for s in sessions {
        if let Some(c) = config.app_category_map.get(&s.app_id) {
            *per_cat.get_mut(c).expect("all categories present") += s.duration_s;
        }
    }
    let mapped: f64 = per_cat.values().sum();
    out.extend(AppCategory::ALL.iter().map(|c| Some(per_cat[c])));
    out.extend(
        AppCategory::ALL
            .iter()
            .map(|c| (mapped > 0.0).then(|| 100.0 * per_cat[c] / mapped)),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(h: u32, m: u32) -> Instant {
        FixedOffset::east_opt(3600)
            .unwrap()
            .with_ymd_and_hms(2024, 3, 4, h, m, 0)
            .unwrap()
    }

    #[test]
    fn partition_boundaries() {
        let cfg = ExtractionConfig::default();
        let times = [at(23, 0), at(12, 0), at(22, 0), at(6, 0)];
        let (day, night) = night_partition(&times, |t| *t, &cfg);
        assert_eq!(night, vec![at(23, 0), at(22, 0)]);
        assert_eq!(day, vec![at(12, 0), at(6, 0)]);
    }

    #[test]
    fn steps() {
        let cfg = ExtractionConfig::default();
        assert_eq!(step_features(7500, &cfg), [7500.0, 1.0, 1.0, 0.0]);
        assert_eq!(step_features(0, &cfg), [0.0; 4]);
        assert_eq!(step_features(10000, &cfg), [10000.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn app_two_sessions_one_app() {
        let cfg = ExtractionConfig::default();
        let s = |m| AppSession {
            app_id: "org.social.feed".into(),
            start: at(10, m),
            duration_s: 60.0,
        };
        let f = app_usage_features(&[s(0), s(30)], &cfg);
        assert_eq!(f.len(), 30);
        assert_eq!(&f[..5], &[Some(2.0), Some(1.0), Some(120.0), Some(60.0), Some(60.0)]);
        assert_eq!(&f[5..10], &[Some(0.0), Some(0.0), Some(0.0), None, None]);
        let names = app_usage_feature_names();
        let pct = names.iter().position(|n| n == "pct_social_media").unwrap();
        assert_eq!(f[pct], Some(100.0));
        assert!(app_usage_features(&[], &cfg).iter().all(Option::is_none));
    }

    #[test]
    fn app_unmapped_excluded_from_categories() {
        let cfg = ExtractionConfig::default();
        let sessions = [
            AppSession {
                app_id: "org.social.feed".into(),
                start: at(10, 0),
                duration_s: 30.0,
            },
            AppSession {
                app_id: "com.unknown".into(),
                start: at(11, 0),
                duration_s: 90.0,
            },
        ];
        let f = app_usage_features(&sessions, &cfg);
        assert_eq!(f[2], Some(120.0));
        let cat_total: f64 = f[10..20].iter().map(|v| v.unwrap()).sum();
        assert_eq!(cat_total, 30.0);
        let pct_total: f64 = f[20..30].iter().map(|v| v.unwrap()).sum();
        assert!((pct_total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn battery_discharge_rate() {
        let cfg = ExtractionConfig::default();
        let r = |h, level| BatteryReading {
            time: at(h, 0),
            level,
            charging: false,
        };
        let f = battery_features(&[r(10, 100.0), r(11, 95.0), r(12, 90.0)], &cfg);
        assert_eq!(f[5], Some(5.0));
        assert_eq!(f[4], Some(0.0));

        let f = battery_features(&[r(10, 50.0), r(11, 50.0), r(12, 50.0)], &cfg);
        assert_eq!((f[4], f[5]), (Some(0.0), Some(0.0)));

        let f = battery_features(&[r(10, 42.0)], &cfg);
        assert_eq!(&f[..4], &[Some(42.0); 4]);
        assert_eq!((f[5], f[6]), (None, None));
    }

    #[test]
    fn battery_charges_and_low_time() {
        let cfg = ExtractionConfig::default();
        let r = |h, level, charging| BatteryReading {
            time: at(h, 0),
            level,
            charging,
        };
        let f = battery_features(
            &[r(8, 30.0, false), r(9, 15.0, false), r(10, 40.0, true), r(11, 35.0, false), r(23, 80.0, true)],
            &cfg,
        );
        assert_eq!(f[4], Some(2.0));
        assert_eq!(f[5], Some(15.0));
        assert_eq!(f[6], Some(60.0));
        assert_eq!(f[7], Some(1.0));
    }

    #[test]
    fn noise_single_day_reading() {
        let cfg = ExtractionConfig::default();
        let f = noise_features(
            &[TimedValue {
                time: at(12, 0),
                value: 40.0,
            }],
            &cfg,
        );
        assert_eq!(&f[..5], &[Some(40.0), Some(40.0), Some(40.0), Some(40.0), Some(0.0)]);
        assert!(f[5..].iter().all(Option::is_none));
    }

    #[test]
    fn self_app_hours() {
        let cfg = ExtractionConfig::default();
        let f = self_app_features(&[at(8, 0), at(23, 30)], &cfg);
        assert_eq!(f, [Some(8.0), Some(23.0), Some(1.0)]);
    }
}
