use std::collections::BTreeMap;
use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::shapley::shapley_sampling;
use crate::contrastive::TrainedModel;
use crate::error::{Error, Result};
use crate::features::{FeatureRegistry, SensorGroup};
use crate::nn::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionConfig {
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig {
            n_permutations: 200,
            seed: 0,
        }
    }
}

/// Sum of absolute attributions per registry column over some rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTally {
    pub sum_abs: Vec<f64>,
    pub rows: usize,
    /// Largest `|Σ attributions − (f(x) − f(baseline))|` seen.
    pub max_efficiency_gap: f64,
}

impl ImportanceTally {
    pub fn zeros(width: usize) -> Self {
        ImportanceTally {
            sum_abs: vec![0.0; width],
            rows: 0,
            max_efficiency_gap: 0.0,
        }
    }

    pub fn merge(&mut self, other: &ImportanceTally) -> Result<()> {
        if other.sum_abs.len() != self.sum_abs.len() {
            return Err(Error::Shape("importance tallies differ in width".into()));
        }
        self.sum_abs.iter_mut().zip(&other.sum_abs).for_each(|(a, b)| *a += b);
        self.rows += other.rows;
        self.max_efficiency_gap = self.max_efficiency_gap.max(other.max_efficiency_gap);
        Ok(())
    }

    /// Mean absolute attribution per column.
    pub fn mean_abs(&self) -> Vec<f64> {
        let n = self.rows.max(1) as f64;
        self.sum_abs.iter().map(|s| s / n).collect()
    }
}

/// Attributes every row against the model's training medians and tallies
/// absolute attributions by registry column. Columns the model does not read
/// get zero. Row `i` uses the seed `derive_seed(config.seed, [i])`.
pub fn attribute_rows(model: &TrainedModel, rows: &[&[Option<f64>]], config: &AttributionConfig) -> Result<ImportanceTally> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no rows to attribute".into()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Shape("rows differ in width".into()));
    }
    if model.input.columns.iter().any(|&c| c >= width) {
        return Err(Error::Shape(format!("model reads columns beyond row width {width}")));
    }
    let baseline = model.input.transform_one(&vec![None; width]);
    let x: Array2<f64> = model.input.transform(rows);
    let per_row: Vec<Result<(Vec<f64>, f64)>> = (0..rows.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(derive_seed(config.seed, &[i as u64]));
            let xi = x.row(i).to_vec();
            let a = shapley_sampling(|b| model.predict_normalized(b), &xi, &baseline, config.n_permutations, &mut rng)?;
            Ok((a.values.clone(), a.efficiency_gap().abs()))
        })
        .collect();
    let mut tally = ImportanceTally::zeros(width);
    for r in per_row {
        let (values, gap) = r?;
        for (&col, v) in model.input.columns.iter().zip(values) {
            tally.sum_abs[col] += v.abs();
        }
        tally.rows += 1;
        tally.max_efficiency_gap = tally.max_efficiency_gap.max(gap);
    }
    Ok(tally)
}

/// Mean absolute attribution per registry column.
pub fn global_importance(model: &TrainedModel, rows: &[&[Option<f64>]], config: &AttributionConfig) -> Result<Vec<f64>> {
    Ok(attribute_rows(model, rows, config)?.mean_abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub group: SensorGroup,
    pub mean_abs_attribution: f64,
}

/// Pairs importances with registry names, sorted by decreasing importance
/// (ties by registry order).
pub fn ranked_features(importances: &[f64], registry: &FeatureRegistry) -> Result<Vec<FeatureImportance>> {
    if importances.len() != registry.len() {
        return Err(Error::Shape(format!(
            "{} importances for {} registry features",
            importances.len(),
            registry.len()
        )));
    }
    let mut out: Vec<FeatureImportance> = registry
        .features
        .iter()
        .zip(importances)
        .map(|(f, &v)| FeatureImportance {
            feature: f.name.clone(),
            group: f.sensor_group,
            mean_abs_attribution: v,
        })
        .collect();
    out.sort_by(|a, b| b.mean_abs_attribution.total_cmp(&a.mean_abs_attribution));
    Ok(out)
}

/// Names of the `k` most important features.
pub fn top_features(importances: &[f64], registry: &FeatureRegistry, k: usize) -> Result<Vec<String>> {
    Ok(ranked_features(importances, registry)?
        .into_iter()
        .take(k)
        .map(|f| f.feature)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    /// Feature name for self-report items, sensor group name otherwise.
    pub name: String,
    pub group: SensorGroup,
    pub score: f64,
}

/// Self-report features individually, passive features summed per sensor group.
pub fn aggregate_by_sensor(importances: &[f64], registry: &FeatureRegistry) -> Result<Vec<GroupImportance>> {
    if importances.len() != registry.len() {
        return Err(Error::Shape(format!(
            "{} importances for {} registry features",
            importances.len(),
            registry.len()
        )));
    }
    let mut out = Vec::new();
    let mut groups: BTreeMap<SensorGroup, f64> = BTreeMap::new();
    for (f, &v) in registry.features.iter().zip(importances) {
        if f.sensor_group.is_active() {
            out.push(GroupImportance {
                name: f.name.clone(),
                group: f.sensor_group,
                score: v,
            });
        } else {
            *groups.entry(f.sensor_group).or_insert(0.0) += v;
        }
    }
    out.extend(groups.into_iter().map(|(g, score)| GroupImportance {
        name: g.as_str().to_string(),
        group: g,
        score,
    }));
    Ok(out)
}

/// `feature,group,mean_abs_attribution`, most important first.
pub fn write_importance_csv<W: Write>(w: W, ranked: &[FeatureImportance]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["feature", "group", "mean_abs_attribution"])?;
    for f in ranked {
        wtr.write_record([f.feature.as_str(), f.group.as_str(), &format!("{:.9}", f.mean_abs_attribution)])?;
    }
    wtr.flush().map_err(|e| Error::io("<importance csv>", e))
}

pub fn write_group_csv<W: Write>(w: W, groups: &[GroupImportance]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["name", "group", "score"])?;
    for g in groups {
        wtr.write_record([g.name.as_str(), g.group.as_str(), &format!("{:.9}", g.score)])?;
    }
    wtr.flush().map_err(|e| Error::io("<group csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_location_feature_carries_its_group() {
        let reg = FeatureRegistry::default();
        let mut imp = vec![0.0; reg.len()];
        imp[reg.position("location_entropy").unwrap()] = 1.0;
        let groups = aggregate_by_sensor(&imp, &reg).unwrap();
        let loc = groups.iter().find(|g| g.name == "location").unwrap();
        assert_eq!(loc.score, 1.0);
        assert_eq!(groups.iter().map(|g| g.score).sum::<f64>(), 1.0);
        assert_eq!(groups.iter().filter(|g| g.group.is_active()).count(), 13);
    }

    #[test]
    fn uniform_importance_is_group_size() {
        let reg = FeatureRegistry::default();
        let groups = aggregate_by_sensor(&vec![1.0; reg.len()], &reg).unwrap();
        for g in groups.iter().filter(|g| !g.group.is_active()) {
            let size = reg.features.iter().filter(|f| f.sensor_group == g.group).count();
            assert_eq!(g.score, size as f64);
        }
    }

    #[test]
    fn ranking_orders_descending() {
        let reg = FeatureRegistry::default();
        let mut imp = vec![0.0; reg.len()];
        imp[3] = 0.5;
        imp[10] = 0.9;
        let top = top_features(&imp, &reg, 2).unwrap();
        assert_eq!(top, vec![reg.features[10].name.clone(), reg.features[3].name.clone()]);
    }
}
