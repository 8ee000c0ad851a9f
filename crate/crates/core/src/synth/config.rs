use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cohort::{Outcome, Question, SensorKind};
use crate::error::{Error, Result};

/// Latent per-user behavior dimensions that drive the simulated streams.
/// Each is standard normal across users before planted shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
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
    Steps,
    /// Number and evenness of places visited near home.
    LocationSpread,
    /// Distance of regular places and frequency of far trips.
    Roaming,
    DayLight,
    NightLight,
    DayNoise,
    NightNoise,
    DayBrightness,
    NightBrightness,
    BatteryDrain,
    ChargeFrequency,
    /// Phone awake at night (battery and brightness readings).
    NightPhone,
    AppTotal,
    SocialMedia,
    NightApp,
    SelfAppLate,
}

impl Channel {
    pub const COUNT: usize = 29;

    pub const ALL: [Channel; Channel::COUNT] = [
        Channel::Mood,
        Channel::SleepQuality,
        Channel::Loneliness,
        Channel::Confidence,
        Channel::Motivation,
        Channel::Productivity,
        Channel::Energy,
        Channel::Sociability,
        Channel::SelfCare,
        Channel::Hopefulness,
        Channel::NegativeThinking,
        Channel::RacingThoughts,
        Channel::Irritability,
        Channel::Steps,
        Channel::LocationSpread,
        Channel::Roaming,
        Channel::DayLight,
        Channel::NightLight,
        Channel::DayNoise,
        Channel::NightNoise,
        Channel::DayBrightness,
        Channel::NightBrightness,
        Channel::BatteryDrain,
        Channel::ChargeFrequency,
        Channel::NightPhone,
        Channel::AppTotal,
        Channel::SocialMedia,
        Channel::NightApp,
        Channel::SelfAppLate,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn question(q: Question) -> Channel {
        Channel::ALL[q.index()]
    }

    /// Whether the channel is observed through self-report rather than sensors.
    pub fn is_active(self) -> bool {
        self.index() < Question::ALL.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub outcome: Outcome,
    pub channel: Channel,
    /// High-risk minus low-risk difference in latent standard deviations.
    pub size: f64,
}

/// How risk status shifts behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectMode {
    /// ±size/2 by risk group.
    Binary,
    /// size/2 · tanh((z − threshold)/width): users near a threshold barely differ.
    Graded { width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsentModel {
    /// Probability a participant enables no passive sensors at all.
    pub p_no_sensors: f64,
    /// Probability each sensor is enabled, given some are and the platform supports it.
    pub sensor_probability: BTreeMap<SensorKind, f64>,
    pub p_ios: f64,
}

impl Default for ConsentModel {
    fn default() -> Self {
        let sensor_probability = [
            (SensorKind::Steps, 0.9),
            (SensorKind::Battery, 0.9),
            (SensorKind::SelfApp, 0.8),
            (SensorKind::ScreenBrightness, 0.8),
            (SensorKind::Location, 0.7),
            (SensorKind::AppUsage, 0.7),
            (SensorKind::AmbientLight, 0.7),
            (SensorKind::Noise, 0.6),
        ]
        .into_iter()
        .collect();
        ConsentModel {
            p_no_sensors: 0.35,
            sensor_probability,
            p_ios: 0.76,
        }
    }
}

/// Daily contribution probability `initial · exp(−decay · day)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attrition {
    pub initial: f64,
    pub decay: f64,
}

impl Attrition {
    pub fn probability(&self, day: u32) -> f64 {
        (self.initial * (-self.decay * day as f64).exp()).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_users: usize,
    pub days: u32,
    /// High-risk prevalence per outcome.
    pub prevalence: BTreeMap<Outcome, f64>,
    pub effects: Vec<PlantedEffect>,
    pub effect_mode: EffectMode,
    pub consent: ConsentModel,
    pub active_attrition: Attrition,
    pub passive_attrition: Attrition,
    /// SD of stable per-user offsets on every channel.
    pub signature_sd: f64,
    /// SD of day-to-day variation around a user's own level.
    pub daily_sd: f64,
    pub seed: u64,
}

fn effect(outcome: Outcome, channel: Channel, size: f64) -> PlantedEffect {
    PlantedEffect { outcome, channel, size }
}

/// High-risk users report more negative thinking, racing thoughts and loneliness,
/// less self-care and hope, range over more places, see more light at night and
/// walk less (SDQ); the other outcomes follow the same pattern with their own
/// self-report and sensor channels.
pub fn default_effects() -> Vec<PlantedEffect> {
    use Channel::*;
    use Outcome::*;
    vec![
        effect(Sdq, NegativeThinking, 2.0),
        effect(Sdq, RacingThoughts, 1.1),
        effect(Sdq, Loneliness, 0.8),
        effect(Sdq, SelfCare, -0.8),
        effect(Sdq, Hopefulness, -0.8),
        effect(Sdq, LocationSpread, 2.2),
        effect(Sdq, NightLight, 1.1),
        effect(Sdq, Steps, -1.3),
        effect(Insomnia, SleepQuality, -2.8),
        effect(Insomnia, Energy, -1.7),
        effect(Insomnia, SelfAppLate, 2.1),
        effect(Insomnia, NightPhone, 2.1),
        effect(Insomnia, NightBrightness, 1.4),
        effect(Insomnia, NightApp, 1.4),
        effect(Suicidal, Mood, -1.1),
        effect(Suicidal, Sociability, -0.7),
        effect(Suicidal, Irritability, 0.6),
        effect(Suicidal, Roaming, -2.6),
        effect(Suicidal, Steps, -1.3),
        effect(Suicidal, NightNoise, 1.4),
        effect(Eating, Confidence, -2.5),
        effect(Eating, Motivation, -1.7),
        effect(Eating, BatteryDrain, 2.2),
        effect(Eating, ChargeFrequency, 1.7),
        effect(Eating, SocialMedia, 2.2),
        effect(Eating, DayBrightness, 1.7),
    ]
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_users: 100,
            days: 14,
            prevalence: [
                (Outcome::Sdq, 0.30),
                (Outcome::Insomnia, 0.33),
                (Outcome::Suicidal, 0.37),
                (Outcome::Eating, 0.37),
            ]
            .into_iter()
            .collect(),
            effects: default_effects(),
            effect_mode: EffectMode::Binary,
            consent: ConsentModel::default(),
            active_attrition: Attrition {
                initial: 1.0,
                decay: 0.151,
            },
            passive_attrition: Attrition {
                initial: 1.0,
                decay: 0.081,
            },
            signature_sd: 1.0,
            daily_sd: 0.8,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Graded effects: behavior changes smoothly across each threshold, so users
    /// scoring near a cut-off are hard to tell apart.
    pub fn borderline() -> Self {
        GeneratorConfig {
            effect_mode: EffectMode::Graded { width: 0.75 },
            effects: default_effects().into_iter().map(|e| PlantedEffect { size: e.size * 1.5, ..e }).collect(),
            ..Self::default()
        }
    }

    /// No coupling between risk and behavior.
    pub fn null() -> Self {
        GeneratorConfig {
            effects: Vec::new(),
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "borderline" => Ok(Self::borderline()),
            "null" => Ok(Self::null()),
            other => Err(Error::Config(format!("unknown preset `{other}` (default, borderline, null)"))),
        }
    }

    pub fn prevalence_of(&self, outcome: Outcome) -> f64 {
        self.prevalence.get(&outcome).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        if self.days == 0 || self.days > crate::cohort::STUDY_DAYS {
            return bad(format!("days must be in 1..={}", crate::cohort::STUDY_DAYS));
        }
        for o in Outcome::ALL {
            let p = self.prevalence_of(o);
            // Scores are back-filled on both sides of each threshold, so both groups must be possible.
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("prevalence for {o} must be strictly between 0 and 1, got {p}"));
            }
        }
        if let Some(e) = self.effects.iter().find(|e| !e.size.is_finite()) {
            return bad(format!("effect on {:?} is not finite", e.channel));
        }
        if let EffectMode::Graded { width } = self.effect_mode {
            if !(width > 0.0 && width.is_finite()) {
                return bad("graded effect width must be positive".into());
            }
        }
        let probs = [self.consent.p_no_sensors, self.consent.p_ios]
            .into_iter()
            .chain(self.consent.sensor_probability.values().copied())
            .chain([self.active_attrition.initial, self.passive_attrition.initial]);
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if self.active_attrition.decay < 0.0 || self.passive_attrition.decay < 0.0 {
            return bad("attrition decay must be non-negative".into());
        }
        if !(self.signature_sd >= 0.0 && self.daily_sd >= 0.0) {
            return bad("signature_sd and daily_sd must be non-negative".into());
        }
        Ok(())
    }
}
