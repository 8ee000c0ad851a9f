use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// Hyperparameters for one pretrain + fine-tune run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    pub triplets_per_epoch: usize,
    /// Fine-tuning minibatches per epoch; `None` means one pass worth of rows.
    pub finetune_batches_per_epoch: Option<usize>,
    pub margin: f64,
    pub lr: f64,
    pub patience: usize,
    /// Fraction of training users held out for early stopping.
    pub val_fraction: f64,
    pub freeze_embedder: bool,
    /// Inverse-frequency sampler and `neg/pos` positive weight; off means uniform draws, weight 1.
    pub class_balance: bool,
    pub probe_triplets: usize,
    /// Widths after the input layer; the last one is the embedding width.
    pub embedder_dims: Vec<usize>,
    pub projection_dims: Vec<usize>,
    /// Hidden widths of the classifier; a single logit follows.
    pub classifier_hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            pretrain_epochs: 10,
            finetune_epochs: 30,
            batch_size: 64,
            triplets_per_epoch: 512,
            finetune_batches_per_epoch: None,
            margin: 1.0,
            lr: 1e-3,
            patience: 5,
            val_fraction: 0.1,
            freeze_embedder: false,
            class_balance: true,
            probe_triplets: 256,
            embedder_dims: vec![64, 32],
            projection_dims: vec![32, 16],
            classifier_hidden: vec![16],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.pretrain_epochs > 0 && self.triplets_per_epoch == 0 {
            return bad("triplets_per_epoch must be positive");
        }
        if self.finetune_epochs == 0 {
            return bad("finetune_epochs must be positive");
        }
        if self.finetune_batches_per_epoch == Some(0) {
            return bad("finetune_batches_per_epoch must be positive");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must be in [0, 1)");
        }
        if self.embedder_dims.is_empty() || self.projection_dims.is_empty() {
            return bad("embedder_dims and projection_dims must be non-empty");
        }
        if self.embedder_dims.iter().chain(&self.projection_dims).chain(&self.classifier_hidden).any(|&d| d == 0) {
            return bad("layer widths must be positive");
        }
        Ok(())
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedder_dims[self.embedder_dims.len() - 1]
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_partial_json_fills_defaults() {
        TrainConfig::default().validate().unwrap();
        let c: TrainConfig = serde_json::from_str(r#"{"margin": 0.5}"#).unwrap();
        assert_eq!(c.margin, 0.5);
        assert_eq!(c.batch_size, 64);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            TrainConfig { margin: 0.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { val_fraction: 1.0, ..Default::default() },
            TrainConfig { embedder_dims: vec![], ..Default::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }
}
