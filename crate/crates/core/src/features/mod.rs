//! Daily feature extraction, cumulative-median aggregation and fold-scoped normalization.

mod config;
mod correlation;
mod dataset;
mod geo;
mod norm;
mod registry;
mod sensors;
mod stats;

pub use config::{AppCategory, ExtractionConfig, NightWindow, DEFAULT_APP_CATALOG};
pub use correlation::correlation_matrix;
pub use dataset::{build_dataset, columns_where, cumulative_median, rows_per_user, Dataset, DayFeatureRow, ParticipantMeta};
pub use geo::{
    cell_of, haversine_m, home_features, infer_home, location_count, location_day_features, location_entropy,
    path_length, radius_of_gyration, HomeFeatures, LatLon, LocPoint, EARTH_RADIUS_M, LOCATION_FEATURES,
};
pub use norm::{apply_norm, fit_norm, NormStats};
pub use registry::{FeatureRegistry, FeatureSpec, SensorGroup, REGISTRY_VERSION};
pub use sensors::{
    app_usage_feature_names, app_usage_features, battery_features, light_like_features, night_partition,
    noise_features, self_app_features, step_features, AppSession, BatteryReading, TimedValue, BATTERY_FEATURES,
    LIGHT_FEATURES, NOISE_FEATURES, SELF_APP_FEATURES, STEP_FEATURES,
};
pub use stats::{mean, median, stat_block, StatBlock};
