use std::collections::BTreeSet;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, NaiveTime, TimeZone};
use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{Channel, EffectMode, GeneratorConfig};
use crate::cohort::{
    ActiveResponse, Cohort, Gender, Outcome, Participant, Payload, PassiveEvent, Platform, Question, SensorKind,
};
use crate::error::Result;
use crate::features::{AppCategory, DEFAULT_APP_CATALOG};
use crate::nn::{derive_seed, seeded, Rng};

/// Latent assignments behind one generated participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub participant_id: String,
    /// Latent risk per outcome, in [`Outcome::ALL`] order.
    pub latent: [f64; 4],
    pub high_risk: [bool; 4],
    /// User-level channel levels after planted shifts, in [`Channel::ALL`] order.
    pub channel_levels: Vec<f64>,
}

/// Ground truth for tests: latent assignments and the planted effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: GeneratorConfig,
    /// Latent cut-off per outcome (standard-normal quantile of 1 − prevalence).
    pub thresholds: [f64; 4],
    pub participants: Vec<TruthRecord>,
}

type Emitter = fn(&Day, &mut Rng, &mut Vec<PassiveEvent>);

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Questionnaire scores consistent with the latent risk side of each threshold.
/// Each score is linear in the latent value, centered on its cut-off, then
/// clamped into the range of its own risk group.
fn scores_from_latent(z: &[f64; 4], c: &[f64; 4]) -> (u32, u32, u32, f64) {
    let d = |o: Outcome| z[o.index()] - c[o.index()];
    let sdq_s = 15.5 + 6.2 * d(Outcome::Sdq);
    let sdq = if d(Outcome::Sdq) > 0.0 {
        sdq_s.round().clamp(16.0, 40.0)
    } else {
        sdq_s.round().clamp(0.0, 15.0)
    };
    // Lower SCI is worse sleep.
    let sci_s = 16.5 - 7.8 * d(Outcome::Insomnia);
    let sci = if d(Outcome::Insomnia) > 0.0 {
        sci_s.round().clamp(0.0, 16.0)
    } else {
        sci_s.round().clamp(17.0, 32.0)
    };
    let si_s = 0.5 + 0.9 * d(Outcome::Suicidal);
    let si = if d(Outcome::Suicidal) > 0.0 {
        si_s.round().clamp(1.0, 3.0)
    } else {
        0.0
    };
    let ed_s = ((2.695 + 1.8 * d(Outcome::Eating)) * 100.0).round() / 100.0;
    let ed = if d(Outcome::Eating) > 0.0 {
        ed_s.clamp(2.70, 6.0)
    } else {
        ed_s.clamp(0.0, 2.69)
    };
    (sdq as u32, sci as u32, si as u32, ed)
}

const BASE_LAT: f64 = 51.50;
const BASE_LON: f64 = -0.12;
const METERS_PER_DEG_LAT: f64 = 111_195.0;

fn snap_to_cell(v: f64) -> f64 {
    // Cell centers of the default 3-decimal grid.
    (v * 1000.0).round() / 1000.0
}

fn offset(lat: f64, lon: f64, north_m: f64, east_m: f64) -> (f64, f64) {
    let dlat = north_m / METERS_PER_DEG_LAT;
    let dlon = east_m / (METERS_PER_DEG_LAT * lat.to_radians().cos());
    (lat + dlat, lon + dlon)
}

struct UserPlan {
    id: String,
    tz: FixedOffset,
    start: NaiveDate,
    sensors: BTreeSet<SensorKind>,
    level: Vec<f64>,
    home: (f64, f64),
    places: Vec<(f64, f64)>,
}

impl UserPlan {
    fn at(&self, date: NaiveDate, hour: u32, minute: u32) -> DateTime<FixedOffset> {
        let t = NaiveTime::from_hms_opt(hour % 24, minute % 60, 0).expect("valid time");
        let dt = date.and_time(t) + Duration::days(i64::from(hour / 24));
        self.tz.from_local_datetime(&dt).single().expect("fixed offsets are unambiguous")
    }

    fn has(&self, s: SensorKind) -> bool {
        self.sensors.contains(&s)
    }
}

struct Day<'a> {
    plan: &'a UserPlan,
    date: NaiveDate,
    value: Vec<f64>,
}

impl Day<'_> {
    fn v(&self, c: Channel) -> f64 {
        self.value[c.index()]
    }
}

fn event(plan: &UserPlan, timestamp: DateTime<FixedOffset>, payload: Payload) -> PassiveEvent {
    PassiveEvent {
        participant_id: plan.id.clone(),
        timestamp,
        payload,
    }
}

fn active_day(day: &Day, rng: &mut Rng, out: &mut Vec<ActiveResponse>) {
    for q in Question::ALL {
        if rng.random::<f64>() < 0.05 {
            continue;
        }
        let positive = !matches!(
            q,
            Question::Loneliness | Question::NegativeThinking | Question::RacingThoughts | Question::Irritability
        );
        let center = if positive { 4.5 } else { 3.5 };
        let value = (center + 1.1 * day.v(Channel::question(q))).round().clamp(1.0, 7.0) as u32;
        out.push(ActiveResponse {
            participant_id: day.plan.id.clone(),
            date: day.date,
            question: q,
            value,
        });
    }
}

fn self_app_day(day: &Day, rng: &mut Rng, out: &mut Vec<PassiveEvent>) {
    let n = rng.random_range(1..=3);
    let last = (20.0 + 1.8 * day.v(Channel::SelfAppLate)).clamp(9.0, 23.9);
    let first = (last - rng.random_range(0.0..8.0)).max(7.0);
    for i in 0..n {
        let h = if n == 1 { last } else { first + (last - first) * i as f64 / (n - 1) as f64 };
        let t = day.plan.at(day.date, h as u32, ((h.fract()) * 60.0) as u32);
        out.push(event(day.plan, t, Payload::SelfApp { start: t }));
    }
}

/// Ceiling on a generated daily step count; the log-normal tail is unbounded.
pub const MAX_DAILY_STEPS: u32 = 60_000;

fn steps_day(day: &Day, rng: &mut Rng, out: &mut Vec<PassiveEvent>) {
    let raw = (6000.0_f64.ln() + 0.45 * day.v(Channel::Steps) + 0.1 * normal(rng)).exp();
    let count = raw.min(f64::from(MAX_DAILY_STEPS)).round() as u32;
    out.push(event(
        day.plan,
        day.plan.at(day.date, 23, 59),
        Payload::Steps {
            date: day.date,
            count,
        },
    ));
}

fn location_day(day: &Day, rng: &mut Rng, out: &mut Vec<PassiveEvent>) {
    let plan = day.plan;
    let spread = day.v(Channel::LocationSpread);
    let away = sigmoid(-0.2 + 0.9 * spread);
    let k = ((2.0 + 1.5 * spread).round() as usize).clamp(1, plan.places.len());
    let far_trip = rng.random::<f64>() < sigmoid(-1.5 + 1.0 * day.v(Channel::Roaming));
    let far_hour = rng.random_range(10..17);
    let far = {
        let r = rng.random_range(8_000.0..25_000.0);
        let b: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        offset(plan.home.0, plan.home.1, r * b.cos(), r * b.sin())
    };
    for hour in 0..24u32 {
        let night = !(6..22).contains(&hour);
        let (lat, lon) = if night {
            plan.home
        } else if far_trip && (far_hour..far_hour + 2).contains(&hour) {
            (snap_to_cell(far.0), snap_to_cell(far.1))
        } else if rng.random::<f64>() < away {
            plan.places[rng.random_range(0..k)]
        } else {
            plan.home
        };
        let (lat, lon) = offset(lat, lon, rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0));
        let t = plan.at(day.date, hour, rng.random_range(0..60));
        out.push(event(plan, t, Payload::Location { lat, lon }));
    }
}

fn night_hours() -> impl Iterator<Item = u32> {
    (0..6).chain(22..24)
}

fn battery_day(day: &Day, rng: &mut Rng, out: &mut Vec<PassiveEvent>) {
    let plan = day.plan;
    let drain = 5.0 * (0.35 * day.v(Channel::BatteryDrain)).exp();
    let charge_at = (30.0 + 15.0 * day.v(Channel::ChargeFrequency)).clamp(8.0, 85.0);
    let awake_night = sigmoid(-1.0 + 1.2 * day.v(Channel::NightPhone));
    let mut level: f64 = 100.0;
    let mut charging_left = 0;
    for hour in 0..24u32 {
        let night = !(6..22).contains(&hour);
        let charging = if night { !(6..23).contains(&hour) } else { charging_left > 0 };
        if night {
            if charging {
                level = (level + 20.0).min(100.0);
            } else {
                level = (level - 0.5 * drain).max(1.0);
            }
        } else if charging {
            level = (level + 25.0).min(100.0);
            charging_left -= 1;
        } else {
            level = (level - drain * (0.8 + 0.4 * rng.random::<f64>())).max(1.0);
            if level < charge_at {
                charging_left = 2;
            }
        }
        if night && rng.random::<f64>() >= awake_night {
            continue;
        }
        let t = plan.at(day.date, hour, rng.random_range(0..60));
        out.push(event(
            plan,
            t,
            Payload::Battery {
                level_pct: (level * 10.0).round() / 10.0,
                charging,
            },
        ));
    }
}

fn light_day(day: &Day, rng: &mut Rng, out: &mut Vec<PassiveEvent>) {
    for hour in 0..24u32 {
        let night = !(6..22).contains(&hour);
        let lux = if night {
            (4.0_f64.ln() + 0.7 * day.v(Channel::NightLight) + 0.3 * normal(rng)).exp()
        } else {
            (250.0_f64.ln() + 0.6 * day.v(Channel::DayLight) + 0.3 * normal(rng)).exp()
        };
        let t = day.plan.at(day.date, hour, rng.random_range(0..60));
        out.push(event(day.plan, t, Payload::AmbientLight { lux }));
    }
}

fn noise_day(day: &Day, rng: &mut Rng, out: &mut Vec<PassiveEvent>) {
    for hour in 0..24u32 {
        let night = !(6..22).contains(&hour);
        let db = if night {
            38.0 + 4.0 * day.v(Channel::NightNoise) + 2.0 * normal(rng)
        } else {
            52.0 + 4.0 * day.v(Channel::DayNoise) + 2.0 * normal(rng)
        };
        let t = day.plan.at(day.date, hour, rng.random_range(0..60));
        out.push(event(day.plan, t, Payload::Noise { db }));
    }
}

fn brightness_day(day: &Day, rng: &mut Rng, out: &mut Vec<PassiveEvent>) {
    let awake_night = sigmoid(-1.0 + 1.2 * day.v(Channel::NightPhone));
    for hour in 0..24u32 {
        let night = !(6..22).contains(&hour);
        let level = if night {
            if rng.random::<f64>() >= awake_night {
                continue;
            }
            sigmoid(-1.2 + 0.8 * day.v(Channel::NightBrightness) + 0.2 * normal(rng))
        } else {
            sigmoid(0.2 + 0.8 * day.v(Channel::DayBrightness) + 0.2 * normal(rng))
        };
        let t = day.plan.at(day.date, hour, rng.random_range(0..60));
        out.push(event(day.plan, t, Payload::ScreenBrightness { level }));
    }
}

fn app_day(day: &Day, rng: &mut Rng, out: &mut Vec<PassiveEvent>) {
    let social = (0.6 * day.v(Channel::SocialMedia)).exp();
    let weights: Vec<f64> = DEFAULT_APP_CATALOG
        .iter()
        .map(|(_, c)| match c {
            AppCategory::SocialMedia => 2.0 * social,
            AppCategory::StudyApp => 0.0,
            _ => 1.0,
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let pick = |rng: &mut Rng| -> String {
        if rng.random::<f64>() < 0.1 {
            return format!("org.misc.app{}", rng.random_range(0..6));
        }
        let mut u = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return DEFAULT_APP_CATALOG[i].0.to_string();
            }
            u -= w;
        }
        DEFAULT_APP_CATALOG[0].0.to_string()
    };
    let n_day = (25.0 * (0.25 * day.v(Channel::AppTotal)).exp()).round() as usize;
    let n_night = (0.3 + 0.7 * day.v(Channel::NightApp) + 0.3 * normal(rng)).exp().round() as usize;
    let hours: Vec<u32> = night_hours().collect();
    for i in 0..(n_day + n_night) {
        let hour = if i < n_day { rng.random_range(7..22) } else { *hours.choose(rng).expect("non-empty") };
        let start = day.plan.at(day.date, hour, rng.random_range(0..60));
        let duration_s = ((180.0_f64).ln() + 0.5 * normal(rng)).exp().round();
        out.push(event(
            day.plan,
            start,
            Payload::AppUsage {
                app_id: pick(rng),
                start,
                duration_s,
            },
        ));
    }
}

fn effect_shift(config: &GeneratorConfig, z: &[f64; 4], c: &[f64; 4], level: &mut [f64]) {
    for e in &config.effects {
        let d = z[e.outcome.index()] - c[e.outcome.index()];
        let s = match config.effect_mode {
            EffectMode::Binary => {
                if d > 0.0 {
                    0.5
                } else {
                    -0.5
                }
            }
            EffectMode::Graded { width } => 0.5 * (d / width).tanh(),
        };
        level[e.channel.index()] += e.size * s;
    }
}

fn enabled_sensors(config: &GeneratorConfig, platform: Platform, rng: &mut Rng) -> BTreeSet<SensorKind> {
    let none = rng.random::<f64>() < config.consent.p_no_sensors;
    SensorKind::ALL
        .into_iter()
        .filter(|&s| {
            let p = config.consent.sensor_probability.get(&s).copied().unwrap_or(0.0);
            let draw = rng.random::<f64>();
            !none && s.available_on(platform) && draw < p
        })
        .collect()
}

/// Generates one participant with its own derived stream, so users are
/// independent of each other's generation order.
fn generate_user(
    config: &GeneratorConfig,
    index: usize,
    c: &[f64; 4],
) -> (Participant, Vec<ActiveResponse>, Vec<PassiveEvent>, TruthRecord) {
    let mut rng = seeded(derive_seed(config.seed, &[index as u64]));
    let z: [f64; 4] = std::array::from_fn(|_| normal(&mut rng));
    let high: [bool; 4] = std::array::from_fn(|i| z[i] > c[i]);
    let (sdq, sci, si, ed) = scores_from_latent(&z, c);

    let platform = if rng.random::<f64>() < config.consent.p_ios {
        Platform::Ios
    } else {
        Platform::Android
    };
    let g = rng.random::<f64>();
    let gender = if g < 0.71 {
        Gender::Female
    } else if g < 0.96 {
        Gender::Male
    } else {
        Gender::Other
    };
    let age_years = (16.1 + normal(&mut rng)).clamp(13.0, 19.0);
    let age_years = (age_years * 10.0).round() / 10.0;
    let sensors = enabled_sensors(config, platform, &mut rng);

    let mut level: Vec<f64> = (0..Channel::COUNT).map(|_| config.signature_sd * normal(&mut rng)).collect();
    effect_shift(config, &z, c, &mut level);

    let home_lat = snap_to_cell(BASE_LAT + rng.random_range(-0.08..0.08));
    let home_lon = snap_to_cell(BASE_LON + rng.random_range(-0.12..0.12));
    let reach = (1500.0_f64.ln() + 0.6 * level[Channel::Roaming.index()]).exp();
    let places: Vec<(f64, f64)> = (0..8)
        .map(|_| {
            let r = reach * rng.random_range(0.3..1.5);
            let b: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (la, lo) = offset(home_lat, home_lon, r * b.cos(), r * b.sin());
            (snap_to_cell(la), snap_to_cell(lo))
        })
        .collect();
    let tz = FixedOffset::east_opt(if rng.random::<f64>() < 0.5 { 0 } else { 3600 }).expect("valid offset");
    let start = NaiveDate::from_ymd_opt(2024, 3, 4).expect("valid date") + Duration::days(rng.random_range(0..28));

    let plan = UserPlan {
        id: format!("p{index:04}"),
        tz,
        start,
        sensors,
        level: level.clone(),
        home: (home_lat, home_lon),
        places,
    };
    let participant = Participant {
        participant_id: plan.id.clone(),
        age_years,
        gender,
        platform,
        sdq_total: sdq,
        sci_total: sci,
        si_frequency: si,
        ed15_mean: ed,
        enabled_sensors: plan.sensors.clone(),
        study_start: Some(start),
    };

    let mut active = Vec::new();
    let mut passive = Vec::new();
    for d in 0..config.days {
        let date = plan.start + Duration::days(i64::from(d));
        let mood = 0.5 * normal(&mut rng);
        let value: Vec<f64> = Channel::ALL
            .iter()
            .map(|&ch| {
                let shared = if ch.is_active() {
                    let positive = !matches!(
                        ch,
                        Channel::Loneliness | Channel::NegativeThinking | Channel::RacingThoughts | Channel::Irritability
                    );
                    if positive {
                        mood
                    } else {
                        -mood
                    }
                } else {
                    0.0
                };
                plan.level[ch.index()] + config.daily_sd * normal(&mut rng) + shared
            })
            .collect();
        let day = Day {
            plan: &plan,
            date,
            value,
        };
        let active_on = rng.random::<f64>() < config.active_attrition.probability(d);
        let passive_on = rng.random::<f64>() < config.passive_attrition.probability(d);
        if active_on {
            active_day(&day, &mut rng, &mut active);
            if plan.has(SensorKind::SelfApp) {
                self_app_day(&day, &mut rng, &mut passive);
            }
        }
        if passive_on {
            let emitters: [(SensorKind, Emitter); 7] = [
                (SensorKind::Steps, steps_day),
                (SensorKind::Location, location_day),
                (SensorKind::Battery, battery_day),
                (SensorKind::AmbientLight, light_day),
                (SensorKind::Noise, noise_day),
                (SensorKind::ScreenBrightness, brightness_day),
                (SensorKind::AppUsage, app_day),
            ];
            for (kind, emit) in emitters {
                if plan.has(kind) {
                    emit(&day, &mut rng, &mut passive);
                }
            }
        }
    }
    passive.sort_by_key(|e| e.timestamp);
    let truth = TruthRecord {
        participant_id: plan.id.clone(),
        latent: z,
        high_risk: high,
        channel_levels: level,
    };
    (participant, active, passive, truth)
}

/// Latent cut-offs so that `P(z > c) = prevalence`.
pub fn latent_thresholds(config: &GeneratorConfig) -> [f64; 4] {
    let n = std_normal();
    std::array::from_fn(|i| n.inverse_cdf(1.0 - config.prevalence_of(Outcome::ALL[i])))
}

/// A synthetic cohort and its ground truth. Deterministic in `config`.
pub fn generate(config: &GeneratorConfig) -> Result<(Cohort, GroundTruth)> {
    config.validate()?;
    let c = latent_thresholds(config);
    let mut cohort = Cohort::default();
    let mut truth = GroundTruth {
        config: config.clone(),
        thresholds: c,
        participants: Vec::with_capacity(config.n_users),
    };
    for i in 0..config.n_users {
        let (p, a, e, t) = generate_user(config, i, &c);
        cohort.participants.push(p);
        cohort.active.extend(a);
        cohort.passive.extend(e);
        truth.participants.push(t);
    }
    Ok((cohort, truth))
}
