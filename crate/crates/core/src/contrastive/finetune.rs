use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, weighted_bce, Activation, AdamState, DenseNet, Rng};

/// Draws row indices either uniformly or proportionally to per-row weights.
#[derive(Debug, Clone)]
pub enum RowSampler {
    Uniform(usize),
    Weighted { cumulative: Vec<f64> },
}

impl RowSampler {
    /// Equal weights collapse to [`RowSampler::Uniform`] so that balanced data draws
    /// exactly the same indices as an unweighted sampler.
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InsufficientData("sampler needs at least one row".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidInput("sampler weights must be finite, non-negative, not all zero".into()));
        }
        if weights.iter().all(|&w| w == weights[0]) {
            return Ok(RowSampler::Uniform(weights.len()));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(RowSampler::Weighted { cumulative })
    }

    /// Per-row probability proportional to the inverse frequency of its class.
    pub fn class_balanced(labels: &[bool]) -> Result<Self> {
        let pos = labels.iter().filter(|&&l| l).count() as f64;
        let neg = labels.len() as f64 - pos;
        let w: Vec<f64> = labels.iter().map(|&l| if l { 1.0 / pos } else { 1.0 / neg }).collect();
        Self::new(&w)
    }

    pub fn draw(&self, rng: &mut Rng) -> usize {
        match self {
            RowSampler::Uniform(n) => rng.random_range(0..*n),
            RowSampler::Weighted { cumulative } => {
                let total = cumulative[cumulative.len() - 1];
                let u = rng.random::<f64>() * total;
                cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub val_balanced_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub embedder: DenseNet,
    pub classifier: DenseNet,
    pub positive_weight: f64,
    pub log: Vec<EpochLog>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

pub fn init_classifier(config: &TrainConfig, rng: &mut Rng) -> Result<DenseNet> {
    let dims: Vec<usize> = std::iter::once(config.embedding_dim())
        .chain(config.classifier_hidden.iter().copied())
        .chain(std::iter::once(1))
        .collect();
    let mut acts = vec![Activation::Relu; dims.len() - 1];
    // The logit layer is linear; probabilities come from the sigmoid in prediction.
    *acts.last_mut().expect("at least one layer") = Activation::Identity;
    DenseNet::new(&dims, &acts, rng)
}

/// Balanced accuracy at the 0.5 threshold; `None` when either class is absent.
pub(crate) fn row_balanced_accuracy(probs: &[f64], labels: &[bool]) -> Option<f64> {
    let (mut tp, mut tn, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in probs.iter().zip(labels) {
        if y {
            pos += 1;
            tp += usize::from(p >= 0.5);
        } else {
            neg += 1;
            tn += usize::from(p < 0.5);
        }
    }
    (pos > 0 && neg > 0).then(|| 0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64))
}

/// Splits users into (train, validation) sets, stratified by user label.
fn split_users(user_labels: &BTreeMap<usize, bool>, fraction: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = user_labels.keys().copied().collect();
    let n_val = (all.len() as f64 * fraction).floor() as usize;
    let mut pos: Vec<usize> = user_labels.iter().filter(|e| *e.1).map(|e| *e.0).collect();
    let mut neg: Vec<usize> = user_labels.iter().filter(|e| !*e.1).map(|e| *e.0).collect();
    if n_val < 2 || pos.len() < 2 || neg.len() < 2 {
        return (all, Vec::new());
    }
    pos.shuffle(rng);
    neg.shuffle(rng);
    let share = pos.len() as f64 / all.len() as f64;
    let n_pos = ((n_val as f64 * share).round() as usize).clamp(1, pos.len() - 1);
    let n_neg = (n_val - n_pos.min(n_val)).clamp(1, neg.len() - 1);
    let mut val: Vec<usize> = pos[..n_pos].iter().chain(&neg[..n_neg]).copied().collect();
    val.sort_unstable();
    let train = all.into_iter().filter(|u| val.binary_search(u).is_err()).collect();
    (train, val)
}

fn classify(embedder: &DenseNet, classifier: &DenseNet, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    let logits = classifier.infer(embedder.infer(x)?.view())?;
    Ok(logits.iter().map(|&z| sigmoid(z)).collect())
}

/// Supervised training of a classifier on embedder outputs, with the embedder
/// tuned jointly unless `config.freeze_embedder`.
///
/// `labels[i]` is the label of row `i`'s user; `groups[i]` is that user.
pub fn finetune(
    embedder: DenseNet,
    x: ArrayView2<f64>,
    groups: &[usize],
    labels: &[bool],
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<FinetuneOutcome> {
    config.validate()?;
    if groups.len() != x.nrows() || labels.len() != x.nrows() {
        return Err(Error::Shape(format!(
            "{} rows, {} group ids, {} labels",
            x.nrows(),
            groups.len(),
            labels.len()
        )));
    }
    if embedder.output_dim() != config.embedding_dim() {
        return Err(Error::Shape(format!(
            "embedder width {} differs from configured embedding width {}",
            embedder.output_dim(),
            config.embedding_dim()
        )));
    }
    let mut user_labels: BTreeMap<usize, bool> = BTreeMap::new();
    for (&g, &y) in groups.iter().zip(labels) {
        if *user_labels.entry(g).or_insert(y) != y {
            return Err(Error::InvalidInput(format!("user {g} has rows with both labels")));
        }
    }
    if user_labels.values().all(|&y| y) || user_labels.values().all(|&y| !y) {
        return Err(Error::Degenerate("degenerate labels".into()));
    }

    let (train_users, val_users) = split_users(&user_labels, config.val_fraction, rng);
    let rows_of = |users: &[usize]| -> Vec<usize> {
        (0..groups.len()).filter(|&i| users.binary_search(&groups[i]).is_ok()).collect()
    };
    let train_rows = rows_of(&train_users);
    let val_rows = rows_of(&val_users);
    let train_labels: Vec<bool> = train_rows.iter().map(|&i| labels[i]).collect();
    let n_pos = train_labels.iter().filter(|&&y| y).count();
    let n_neg = train_labels.len() - n_pos;
    let (sampler, positive_weight) = if config.class_balance {
        (RowSampler::class_balanced(&train_labels)?, n_neg as f64 / n_pos as f64)
    } else {
        (RowSampler::Uniform(train_rows.len()), 1.0)
    };
    let val_x = x.select(Axis(0), &val_rows);
    let val_y: Vec<bool> = val_rows.iter().map(|&i| labels[i]).collect();

    let mut embedder = embedder;
    let mut classifier = init_classifier(config, rng)?;
    let mut e_state = AdamState::new(embedder.n_params(), config.adam());
    let mut c_state = AdamState::new(classifier.n_params(), config.adam());
    // A frozen embedder maps every row once up front.
    let frozen: Option<Array2<f64>> = if config.freeze_embedder {
        Some(embedder.infer(x)?)
    } else {
        None
    };
    let batches = config
        .finetune_batches_per_epoch
        .unwrap_or_else(|| train_rows.len().div_ceil(config.batch_size).max(1));

    let mut log = Vec::with_capacity(config.finetune_epochs);
    let mut best: Option<(f64, f64, DenseNet, DenseNet, usize)> = None;
    let mut since_best = 0;
    for epoch in 0..config.finetune_epochs {
        let mut epoch_loss = 0.0;
        for _ in 0..batches {
            let idx: Vec<usize> = (0..config.batch_size).map(|_| train_rows[sampler.draw(rng)]).collect();
            let ys: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
            let scale = 1.0 / idx.len() as f64;
            let (emb, ecache) = match &frozen {
                Some(e) => (e.select(Axis(0), &idx), None),
                None => {
                    let (e, c) = embedder.forward(x.select(Axis(0), &idx).view())?;
                    (e, Some(c))
                }
            };
            let (logits, ccache) = classifier.forward(emb.view())?;
            let mut grad = Array2::zeros(logits.dim());
            let mut loss = 0.0;
            for (k, &y) in ys.iter().enumerate() {
                let (l, g) = weighted_bce(logits[[k, 0]], y, positive_weight);
                loss += l * scale;
                grad[[k, 0]] = g * scale;
            }
            if !loss.is_finite() {
                return Err(Error::Training(format!("fine-tuning loss became {loss} in epoch {epoch}")));
            }
            epoch_loss += loss / batches as f64;
            let (gemb, cgrads) = classifier.backward(&ccache, grad.view())?;
            classifier.adam_step(&cgrads, &mut c_state)?;
            if let Some(ec) = ecache {
                let (_, egrads) = embedder.backward(&ec, gemb.view())?;
                embedder.adam_step(&egrads, &mut e_state)?;
            }
        }
        if !classifier.is_finite() || !embedder.is_finite() {
            return Err(Error::Training(format!("fine-tuning diverged in epoch {epoch}")));
        }

        let mut val_ba = None;
        if !val_rows.is_empty() {
            let probs = classify(&embedder, &classifier, val_x.view())?;
            val_ba = row_balanced_accuracy(&probs, &val_y);
            let val_loss = probs
                .iter()
                .zip(&val_y)
                .map(|(&p, &y)| {
                    let p = p.clamp(1e-12, 1.0 - 1e-12);
                    if y { -p.ln() } else { -(1.0 - p).ln() }
                })
                .sum::<f64>()
                / probs.len() as f64;
            let score = val_ba.unwrap_or(0.0);
            let improved = match &best {
                None => true,
                Some((s, l, ..)) => score > *s || (score == *s && val_loss < *l),
            };
            if improved {
                best = Some((score, val_loss, embedder.clone(), classifier.clone(), epoch));
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        log.push(EpochLog {
            epoch,
            loss: epoch_loss,
            val_balanced_accuracy: val_ba,
        });
        if since_best >= config.patience {
            break;
        }
    }
    let (embedder, classifier, best_epoch) = match best {
        Some((_, _, e, c, ep)) => (e, c, ep),
        None => (embedder, classifier, log.len() - 1),
    };
    Ok(FinetuneOutcome {
        embedder,
        classifier,
        positive_weight,
        log,
        best_epoch,
    })
}
