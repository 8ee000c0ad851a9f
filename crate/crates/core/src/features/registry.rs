use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::geo::LOCATION_FEATURES;
use super::sensors::{
    app_usage_feature_names, BATTERY_FEATURES, LIGHT_FEATURES, NOISE_FEATURES, SELF_APP_FEATURES,
    STEP_FEATURES,
};
use crate::cohort::{Question, SensorKind};
use crate::error::{Error, Result};

pub const REGISTRY_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorGroup {
    Active,
    AmbientLight,
    AppUsage,
    Noise,
    Battery,
    Location,
    SelfApp,
    ScreenBrightness,
    Steps,
}

impl SensorGroup {
    pub fn is_active(self) -> bool {
        self == SensorGroup::Active
    }

    pub fn sensor(self) -> Option<SensorKind> {
        Some(match self {
            SensorGroup::Active => return None,
            SensorGroup::AmbientLight => SensorKind::AmbientLight,
            SensorGroup::AppUsage => SensorKind::AppUsage,
            SensorGroup::Noise => SensorKind::Noise,
            SensorGroup::Battery => SensorKind::Battery,
            SensorGroup::Location => SensorKind::Location,
            SensorGroup::SelfApp => SensorKind::SelfApp,
            SensorGroup::ScreenBrightness => SensorKind::ScreenBrightness,
            SensorGroup::Steps => SensorKind::Steps,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SensorGroup::Active => "active",
            SensorGroup::AmbientLight => "ambient_light",
            SensorGroup::AppUsage => "app_usage",
            SensorGroup::Noise => "noise",
            SensorGroup::Battery => "battery",
            SensorGroup::Location => "location",
            SensorGroup::SelfApp => "self_app",
            SensorGroup::ScreenBrightness => "screen_brightness",
            SensorGroup::Steps => "steps",
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            SensorGroup::Active => "",
            SensorGroup::AmbientLight => "light",
            SensorGroup::AppUsage => "app",
            SensorGroup::ScreenBrightness => "brightness",
            other => other.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub sensor_group: SensorGroup,
    pub extractor_id: String,
}

/// Ordered feature list. Positions are stable for the lifetime of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRegistry {
    pub v: u32,
    pub features: Vec<FeatureSpec>,
}

/// Every extractor the builder knows, in canonical order.
pub(crate) fn canonical_specs() -> Vec<FeatureSpec> {
    let mut specs = Vec::with_capacity(97);
    for q in Question::ALL {
        specs.push(FeatureSpec {
            name: q.as_str().to_string(),
            sensor_group: SensorGroup::Active,
            extractor_id: format!("active.{}", q.as_str()),
        });
    }
    let mut group = |g: SensorGroup, suffixes: Vec<String>| {
        for s in suffixes {
            specs.push(FeatureSpec {
                name: format!("{}_{s}", g.prefix()),
                sensor_group: g,
                extractor_id: format!("{}.{s}", g.as_str()),
            });
        }
    };
    let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    group(SensorGroup::AmbientLight, owned(&LIGHT_FEATURES));
    group(SensorGroup::AppUsage, app_usage_feature_names());
    group(SensorGroup::Noise, owned(&NOISE_FEATURES));
    group(SensorGroup::Battery, owned(&BATTERY_FEATURES));
    group(SensorGroup::Location, owned(&LOCATION_FEATURES));
    group(SensorGroup::SelfApp, owned(&SELF_APP_FEATURES));
    group(SensorGroup::ScreenBrightness, owned(&LIGHT_FEATURES));
    group(SensorGroup::Steps, owned(&STEP_FEATURES));
    specs
}

impl Default for FeatureRegistry {
    /// 13 self-report measures followed by the 84 passive features.
    fn default() -> Self {
        Self {
            v: REGISTRY_VERSION,
            features: canonical_specs(),
        }
    }
}

impl FeatureRegistry {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Position of each feature's extractor in [`canonical_specs`] order.
    pub fn extractor_indices(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let canon = canonical_specs();
        self.features
            .iter()
            .map(|f| {
                canon
                    .iter()
                    .position(|c| c.extractor_id == f.extractor_id)
                    .ok_or_else(|| Error::Config(format!("unknown extractor `{}`", f.extractor_id)))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.v != REGISTRY_VERSION {
            return Err(Error::Config(format!("unsupported registry version {}", self.v)));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Config(format!("duplicate feature name `{}`", f.name)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("registry serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let reg: FeatureRegistry = serde_json::from_str(text)?;
        reg.extractor_indices()?;
        Ok(reg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_shape() {
        let r = FeatureRegistry::default();
        assert_eq!(r.len(), 97);
        let count = |g| r.features.iter().filter(|f| f.sensor_group == g).count();
        assert_eq!(count(SensorGroup::Active), 13);
        assert_eq!(count(SensorGroup::AmbientLight), 8);
        assert_eq!(count(SensorGroup::AppUsage), 30);
        assert_eq!(count(SensorGroup::Noise), 10);
        assert_eq!(count(SensorGroup::Battery), 8);
        assert_eq!(count(SensorGroup::Location), 13);
        assert_eq!(count(SensorGroup::SelfApp), 3);
        assert_eq!(count(SensorGroup::ScreenBrightness), 8);
        assert_eq!(count(SensorGroup::Steps), 4);
        assert!(r.validate().is_ok());
        assert_eq!(r.extractor_indices().unwrap(), (0..97).collect::<Vec<_>>());
    }

    #[test]
    fn location_names_in_table_order() {
        let r = FeatureRegistry::default();
        let loc: Vec<&str> = r
            .features
            .iter()
            .filter(|f| f.sensor_group == SensorGroup::Location)
            .map(|f| f.name.as_str())
            .collect();
        assert_eq!(
            loc,
            [
                "location_mean_lat",
                "location_mean_lon",
                "location_total_distance",
                "location_count",
                "location_max_home_dist",
                "location_mean_home_dist",
                "location_median_home_dist",
                "location_night_movement",
                "location_radius_of_gyration",
                "location_sd_lat",
                "location_sd_lon",
                "location_entropy",
                "location_time_at_home",
            ]
        );
    }

    #[test]
    fn json_roundtrip_and_hash_stability() {
        let r = FeatureRegistry::default();
        let text = serde_json::to_string(&r).unwrap();
        let back = FeatureRegistry::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.hash(), r.hash());
        let mut sub = r.clone();
        sub.features.truncate(5);
        assert_ne!(sub.hash(), r.hash());
    }

    #[test]
    fn rejects_duplicates_and_unknown_extractors() {
        let mut r = FeatureRegistry::default();
        r.features.push(r.features[0].clone());
        assert!(r.validate().is_err());
        let mut r = FeatureRegistry::default();
        r.features[0].extractor_id = "active.bogus".into();
        assert!(r.extractor_indices().is_err());
    }
}
