//! Shapley attribution by permutation sampling, with sensor-group aggregation.

mod importance;
mod shapley;

pub use importance::{
    aggregate_by_sensor, attribute_rows, global_importance, ranked_features, top_features, write_group_csv,
    write_importance_csv, AttributionConfig, FeatureImportance, GroupImportance, ImportanceTally,
};
pub use shapley::{pointwise, shapley_exact, shapley_sampling, Attribution, EXACT_MAX_DIM};
