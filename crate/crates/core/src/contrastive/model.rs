use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::finetune::{finetune, EpochLog};
use super::pretrain::{pretrain, PretrainOutcome};
use crate::cohort::Outcome;
use crate::error::{Error, Result};
use crate::features::{fit_norm, DayFeatureRow, NormStats};
use crate::nn::{derive_seed, seeded, sigmoid, DenseNet};

pub const CHECKPOINT_VERSION: u32 = 1;

const PRETRAIN_STREAM: u64 = 0x5052_4554;
const FINETUNE_STREAM: u64 = 0x4649_4e45;

/// Registry columns fed to the networks and their training-fold normalization.
/// Columns with no spread in the training fold are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMap {
    pub columns: Vec<usize>,
    pub norm: NormStats,
}

impl InputMap {
    pub fn fit(rows: &[&[Option<f64>]], candidates: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData("no training rows".into()));
        }
        let projected: Vec<Vec<Option<f64>>> = rows.iter().map(|r| candidates.iter().map(|&c| r[c]).collect()).collect();
        let refs: Vec<&[Option<f64>]> = projected.iter().map(Vec::as_slice).collect();
        let full = fit_norm(&refs);
        let keep = full.informative_columns();
        if keep.is_empty() {
            return Err(Error::InsufficientData("no informative features in the training rows".into()));
        }
        let pick = |v: &[f64]| keep.iter().map(|&k| v[k]).collect::<Vec<f64>>();
        Ok(InputMap {
            columns: keep.iter().map(|&k| candidates[k]).collect(),
            norm: NormStats {
                medians: pick(&full.medians),
                means: pick(&full.means),
                sds: pick(&full.sds),
                constant: vec![false; keep.len()],
            },
        })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn transform_one(&self, row: &[Option<f64>]) -> Vec<f64> {
        let projected: Vec<Option<f64>> = self.columns.iter().map(|&c| row[c]).collect();
        self.norm.apply_one(&projected)
    }

    pub fn transform(&self, rows: &[&[Option<f64>]]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), self.width()));
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in self.transform_one(r).into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        out
    }
}

/// Networks and input mapping needed to score new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub outcome: Option<Outcome>,
    pub registry_hash: String,
    pub config: TrainConfig,
    pub input: InputMap,
    pub embedder: DenseNet,
    /// Kept for inspection; prediction never uses it.
    pub projection: Option<DenseNet>,
    pub classifier: DenseNet,
}

impl TrainedModel {
    /// Probabilities for rows already mapped through [`InputMap::transform`].
    pub fn predict_normalized(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let logits = self.classifier.infer(self.embedder.infer(x)?.view())?;
        Ok(logits.iter().map(|&z| sigmoid(z)).collect())
    }

    pub fn predict_rows(&self, rows: &[&[Option<f64>]]) -> Result<Vec<f64>> {
        if let Some(r) = rows.iter().find(|r| r.len() <= self.input.columns.iter().copied().max().unwrap_or(0)) {
            return Err(Error::Shape(format!("row has {} values, model reads column {}", r.len(), self.input.columns.iter().max().unwrap_or(&0))));
        }
        self.predict_normalized(self.input.transform(rows).view())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: TrainedModel = serde_json::from_str(&text)?;
        if m.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported checkpoint version {}", m.version)));
        }
        if m.embedder.input_dim() != m.input.width() || m.classifier.input_dim() != m.embedder.output_dim() {
            return Err(Error::Shape("checkpoint network widths do not chain".into()));
        }
        Ok(m)
    }
}

/// Mean of the day-level probabilities of one user's rows.
pub fn predict_user(model: &TrainedModel, rows: &[&[Option<f64>]]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no data for user".into()));
    }
    let p = model.predict_rows(rows)?;
    Ok(p.iter().sum::<f64>() / p.len() as f64)
}

/// Pretrained embedder plus the normalized training matrix it was fitted on.
/// Labels play no part in building this, so one instance serves every outcome.
#[derive(Debug, Clone)]
pub struct PretrainedFold {
    pub input: InputMap,
    pub x: Array2<f64>,
    pub groups: Vec<usize>,
    pub user_ids: Vec<String>,
    pub pretrain: PretrainOutcome,
    pub seed: u64,
}

/// Fits the input map on `rows`, then pretrains from a stream derived from `seed`.
pub fn pretrain_rows(rows: &[&DayFeatureRow], columns: &[usize], config: &TrainConfig, seed: u64) -> Result<PretrainedFold> {
    let values: Vec<&[Option<f64>]> = rows.iter().map(|r| r.values.as_slice()).collect();
    let input = InputMap::fit(&values, columns)?;
    let x = input.transform(&values);
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rows {
        let n = ids.len();
        ids.entry(r.participant_id.as_str()).or_insert(n);
    }
    let groups: Vec<usize> = rows.iter().map(|r| ids[r.participant_id.as_str()]).collect();
    let mut user_ids = vec![String::new(); ids.len()];
    for (id, &g) in &ids {
        user_ids[g] = id.to_string();
    }
    let mut rng = seeded(derive_seed(seed, &[PRETRAIN_STREAM]));
    let pretrain = pretrain(x.view(), &groups, config, &mut rng)?;
    Ok(PretrainedFold {
        input,
        x,
        groups,
        user_ids,
        pretrain,
        seed,
    })
}

/// Fine-tunes a copy of the fold's embedder for one outcome.
/// `label_of` maps a participant id to its label.
pub fn finetune_fold(
    fold: &PretrainedFold,
    outcome: Outcome,
    label_of: impl Fn(&str) -> Option<bool>,
    config: &TrainConfig,
    registry_hash: &str,
) -> Result<(TrainedModel, Vec<EpochLog>)> {
    let mut user_labels = Vec::with_capacity(fold.user_ids.len());
    for id in &fold.user_ids {
        user_labels.push(
            label_of(id).ok_or_else(|| Error::InvalidInput(format!("participant {id} has no {outcome} label")))?,
        );
    }
    let labels: Vec<bool> = fold.groups.iter().map(|&g| user_labels[g]).collect();
    let mut rng = seeded(derive_seed(fold.seed, &[FINETUNE_STREAM, outcome.index() as u64]));
    let out = finetune(
        fold.pretrain.embedder.clone(),
        fold.x.view(),
        &fold.groups,
        &labels,
        config,
        &mut rng,
    )?;
    let model = TrainedModel {
        version: CHECKPOINT_VERSION,
        outcome: Some(outcome),
        registry_hash: registry_hash.to_string(),
        config: config.clone(),
        input: fold.input.clone(),
        embedder: out.embedder,
        projection: Some(fold.pretrain.projection.clone()),
        classifier: out.classifier,
    };
    Ok((model, out.log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_map_drops_constant_columns() {
        let rows = [vec![Some(1.0), Some(5.0), None], vec![Some(3.0), Some(5.0), None]];
        let refs: Vec<&[Option<f64>]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = InputMap::fit(&refs, &[0, 1, 2]).unwrap();
        assert_eq!(m.columns, vec![0]);
        assert_eq!(m.transform_one(&rows[0]), vec![-1.0]);
        assert!(InputMap::fit(&refs, &[1, 2]).is_err());
    }
}
