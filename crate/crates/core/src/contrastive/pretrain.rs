use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::{seeded, triplet_margin_loss, Activation, AdamState, DenseNet, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Precomputed row membership for triplet draws.
#[derive(Debug, Clone)]
pub struct TripletSampler<'a> {
    groups: &'a [usize],
    eligible: Vec<Vec<usize>>,
}

impl<'a> TripletSampler<'a> {
    /// `groups[i]` is the user of row `i`. Needs at least two users with two or more rows.
    pub fn new(groups: &'a [usize]) -> Result<Self> {
        let mut by_user: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &g) in groups.iter().enumerate() {
            by_user.entry(g).or_default().push(i);
        }
        let eligible: Vec<Vec<usize>> = by_user.into_values().filter(|r| r.len() >= 2).collect();
        if eligible.len() < 2 {
            return Err(Error::InsufficientData("insufficient pretraining structure".into()));
        }
        Ok(TripletSampler { groups, eligible })
    }

    /// User uniformly among eligible users, anchor and a distinct positive within
    /// that user, negative uniformly among all other users' rows.
    pub fn draw(&self, rng: &mut Rng) -> Triplet {
        let rows = &self.eligible[rng.random_range(0..self.eligible.len())];
        let a = rng.random_range(0..rows.len());
        let mut p = rng.random_range(0..rows.len() - 1);
        if p >= a {
            p += 1;
        }
        let user = self.groups[rows[a]];
        let negative = loop {
            let n = rng.random_range(0..self.groups.len());
            if self.groups[n] != user {
                break n;
            }
        };
        Triplet {
            anchor: rows[a],
            positive: rows[p],
            negative,
        }
    }
}

pub fn sample_triplets(groups: &[usize], count: usize, rng: &mut Rng) -> Result<Vec<Triplet>> {
    let s = TripletSampler::new(groups)?;
    Ok((0..count).map(|_| s.draw(rng)).collect())
}

fn dims_with_input(input: usize, widths: &[usize]) -> Vec<usize> {
    std::iter::once(input).chain(widths.iter().copied()).collect()
}

pub fn init_embedder(input_dim: usize, config: &TrainConfig, rng: &mut Rng) -> Result<DenseNet> {
    let acts = vec![Activation::Relu; config.embedder_dims.len()];
    DenseNet::new(&dims_with_input(input_dim, &config.embedder_dims), &acts, rng)
}

pub fn init_projection(config: &TrainConfig, rng: &mut Rng) -> Result<DenseNet> {
    let mut acts = vec![Activation::Relu; config.projection_dims.len()];
    *acts.last_mut().expect("validated non-empty") = Activation::Identity;
    DenseNet::new(&dims_with_input(config.embedding_dim(), &config.projection_dims), &acts, rng)
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub embedder: DenseNet,
    pub projection: DenseNet,
    /// Mean probe-set triplet loss at initialization and after every epoch.
    pub probe_losses: Vec<f64>,
}

fn stack(x: &ArrayView2<f64>, triplets: &[Triplet]) -> Array2<f64> {
    let idx: Vec<usize> = triplets
        .iter()
        .map(|t| t.anchor)
        .chain(triplets.iter().map(|t| t.positive))
        .chain(triplets.iter().map(|t| t.negative))
        .collect();
    x.select(Axis(0), &idx)
}

/// Mean triplet loss over a batch and its gradient w.r.t. the stacked [anchors; positives; negatives] outputs.
fn batch_triplet_loss(z: &Array2<f64>, b: usize, margin: f64) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(z.dim());
    let mut total = 0.0;
    let scale = 1.0 / b as f64;
    for i in 0..b {
        let a = z.row(i);
        let p = z.row(b + i);
        let n = z.row(2 * b + i);
        let (l, g) = triplet_margin_loss(
            a.as_slice().expect("standard layout"),
            p.as_slice().expect("standard layout"),
            n.as_slice().expect("standard layout"),
            margin,
        );
        total += l;
        if l > 0.0 {
            for k in 0..z.ncols() {
                grad[[i, k]] = g.anchor[k] * scale;
                grad[[b + i, k]] = g.positive[k] * scale;
                grad[[2 * b + i, k]] = g.negative[k] * scale;
            }
        }
    }
    (total * scale, grad)
}

/// Mean triplet loss of `triplets` through embedder then projection head.
pub fn triplet_objective(
    x: ArrayView2<f64>,
    triplets: &[Triplet],
    embedder: &DenseNet,
    projection: &DenseNet,
    margin: f64,
) -> Result<f64> {
    let stacked = stack(&x, triplets);
    let z = projection.infer(embedder.infer(stacked.view())?.view())?;
    Ok(batch_triplet_loss(&z, triplets.len(), margin).0)
}

/// Flattened gradient of [`triplet_objective`] w.r.t. embedder then projection parameters.
pub fn triplet_objective_grad(
    x: ArrayView2<f64>,
    triplets: &[Triplet],
    embedder: &DenseNet,
    projection: &DenseNet,
    margin: f64,
) -> Result<(f64, Vec<f64>)> {
    let stacked = stack(&x, triplets);
    let (e, ecache) = embedder.forward(stacked.view())?;
    let (z, pcache) = projection.forward(e.view())?;
    let (loss, gz) = batch_triplet_loss(&z, triplets.len(), margin);
    let (ge, pgrads) = projection.backward(&pcache, gz.view())?;
    let (_, egrads) = embedder.backward(&ecache, ge.view())?;
    let mut flat = crate::nn::flatten_grads(&egrads);
    flat.extend(crate::nn::flatten_grads(&pgrads));
    Ok((loss, flat))
}

/// Contrastive pretraining on normalized rows. Labels are deliberately not an input.
///
/// Both networks are initialized from `rng`, so zero epochs returns the
/// initialization drawn from that stream.
pub fn pretrain(x: ArrayView2<f64>, groups: &[usize], config: &TrainConfig, rng: &mut Rng) -> Result<PretrainOutcome> {
    config.validate()?;
    if groups.len() != x.nrows() {
        return Err(Error::Shape(format!("{} rows but {} group ids", x.nrows(), groups.len())));
    }
    let mut embedder = init_embedder(x.ncols(), config, rng)?;
    let mut projection = init_projection(config, rng)?;
    if config.pretrain_epochs == 0 {
        return Ok(PretrainOutcome {
            embedder,
            projection,
            probe_losses: Vec::new(),
        });
    }
    let sampler = TripletSampler::new(groups)?;
    let mut probe_rng = seeded(rng.random());
    let probe: Vec<Triplet> = (0..config.probe_triplets.max(1)).map(|_| sampler.draw(&mut probe_rng)).collect();
    let mut probe_losses = vec![triplet_objective(x, &probe, &embedder, &projection, config.margin)?];

    let mut e_state = AdamState::new(embedder.n_params(), config.adam());
    let mut p_state = AdamState::new(projection.n_params(), config.adam());
    for epoch in 0..config.pretrain_epochs {
        let mut remaining = config.triplets_per_epoch;
        while remaining > 0 {
            let b = remaining.min(config.batch_size);
            remaining -= b;
            let batch: Vec<Triplet> = (0..b).map(|_| sampler.draw(rng)).collect();
            let stacked = stack(&x, &batch);
            let (e, ecache) = embedder.forward(stacked.view())?;
            let (z, pcache) = projection.forward(e.view())?;
            let (loss, gz) = batch_triplet_loss(&z, b, config.margin);
            if !loss.is_finite() {
                return Err(Error::Training(format!("pretraining loss became {loss} in epoch {epoch}")));
            }
            let (ge, pgrads) = projection.backward(&pcache, gz.view())?;
            let (_, egrads) = embedder.backward(&ecache, ge.view())?;
            projection.adam_step(&pgrads, &mut p_state)?;
            embedder.adam_step(&egrads, &mut e_state)?;
        }
        let probe_loss = triplet_objective(x, &probe, &embedder, &projection, config.margin)?;
        if !probe_loss.is_finite() || !embedder.is_finite() {
            return Err(Error::Training(format!("pretraining diverged after epoch {epoch}")));
        }
        probe_losses.push(probe_loss);
    }
    Ok(PretrainOutcome {
        embedder,
        projection,
        probe_losses,
    })
}

/// Mean within-user embedding distance divided by mean across-user distance.
pub fn separation_ratio(x: ArrayView2<f64>, groups: &[usize], embedder: &DenseNet) -> Result<f64> {
    let e = embedder.infer(x)?;
    embedding_separation(e.view(), groups)
}

/// [`separation_ratio`] on precomputed embeddings.
pub fn embedding_separation(e: ArrayView2<f64>, groups: &[usize]) -> Result<f64> {
    if groups.len() != e.nrows() {
        return Err(Error::Shape(format!("{} rows but {} group ids", e.nrows(), groups.len())));
    }
    let n = e.nrows();
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0u64, 0.0, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = e
                .row(i)
                .iter()
                .zip(e.row(j))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if groups[i] == groups[j] {
                intra += d;
                n_intra += 1;
            } else {
                inter += d;
                n_inter += 1;
            }
        }
    }
    if n_inter == 0 {
        return Err(Error::InsufficientData("separation ratio needs at least 2 users".into()));
    }
    if n_intra == 0 {
        return Err(Error::InsufficientData("no user has more than one row".into()));
    }
    if inter == 0.0 {
        return Err(Error::Degenerate("degenerate embeddings".into()));
    }
    Ok((intra / n_intra as f64) / (inter / n_inter as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_by_two_triplets_are_valid() {
        let groups = [0, 0, 1, 1];
        let ts = sample_triplets(&groups, 4, &mut seeded(1)).unwrap();
        assert_eq!(ts.len(), 4);
        for t in ts {
            assert_eq!(groups[t.anchor], groups[t.positive]);
            assert_ne!(t.anchor, t.positive);
            assert_ne!(groups[t.anchor], groups[t.negative]);
        }
    }

    #[test]
    fn single_user_is_rejected() {
        let err = sample_triplets(&[0, 0, 0], 1, &mut seeded(1)).unwrap_err();
        assert!(err.to_string().contains("insufficient pretraining structure"));
        // Two users but only one with repeat days.
        assert!(sample_triplets(&[0, 0, 1], 1, &mut seeded(1)).is_err());
    }

    #[test]
    fn separation_examples() {
        let e = array![[0.0, 0.0], [0.0, 0.0], [3.0, 4.0], [3.0, 4.0]];
        assert_eq!(embedding_separation(e.view(), &[0, 0, 1, 1]).unwrap(), 0.0);
        let same = Array2::<f64>::ones((4, 2));
        assert!(matches!(embedding_separation(same.view(), &[0, 0, 1, 1]), Err(Error::Degenerate(_))));
        assert!(embedding_separation(e.view(), &[0, 1, 2, 3]).is_err());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = TrainConfig {
            pretrain_epochs: 0,
            ..Default::default()
        };
        let x = Array2::<f64>::zeros((4, 3));
        let out = pretrain(x.view(), &[0, 0, 1, 1], &cfg, &mut seeded(5)).unwrap();
        let mut rng = seeded(5);
        assert_eq!(out.embedder, init_embedder(3, &cfg, &mut rng).unwrap());
        assert_eq!(out.projection, init_projection(&cfg, &mut rng).unwrap());
    }

    #[test]
    fn identical_rows_sit_at_margin() {
        let cfg = TrainConfig {
            pretrain_epochs: 3,
            triplets_per_epoch: 32,
            ..Default::default()
        };
        let x = Array2::<f64>::ones((6, 3));
        let out = pretrain(x.view(), &[0, 0, 1, 1, 2, 2], &cfg, &mut seeded(2)).unwrap();
        assert!(out.probe_losses.iter().all(|&l| (l - cfg.margin).abs() < 1e-12));
    }
}
