use ndarray::Array2;
use phenoscope_core::cohort::{LabelThresholds, Outcome};
use phenoscope_core::contrastive::{
    finetune, finetune_fold, init_embedder, predict_user, pretrain_rows, sample_triplets, TrainConfig, TrainedModel,
};
use phenoscope_core::eval::eligible_users;
use phenoscope_core::explain::{attribute_rows, pointwise, shapley_sampling, AttributionConfig};
use phenoscope_core::features::{build_dataset, Dataset, DayFeatureRow, ExtractionConfig, FeatureRegistry};
use phenoscope_core::nn::{seeded, triplet_margin_loss, weighted_bce};
use phenoscope_core::synth::{generate, GeneratorConfig};
use proptest::prelude::*;
use rand::Rng;

fn quick() -> TrainConfig {
    TrainConfig {
        pretrain_epochs: 2,
        finetune_epochs: 3,
        triplets_per_epoch: 128,
        probe_triplets: 64,
        ..TrainConfig::default()
    }
}

fn dataset() -> Dataset {
    let (cohort, _) = generate(&GeneratorConfig {
        n_users: 12,
        seed: 3,
        ..GeneratorConfig::default()
    })
    .unwrap();
    build_dataset(&cohort, &FeatureRegistry::default(), &ExtractionConfig::default(), &LabelThresholds::default())
        .unwrap()
}

fn train(ds: &Dataset, seed: u64) -> TrainedModel {
    let users = eligible_users(ds, true);
    let rows: Vec<&DayFeatureRow> = ds.rows.iter().filter(|r| users.contains(&r.participant_id)).collect();
    let columns: Vec<usize> = (0..ds.registry.len()).collect();
    let fold = pretrain_rows(&rows, &columns, &quick(), seed).unwrap();
    finetune_fold(&fold, Outcome::Sdq, |id| ds.label(id, Outcome::Sdq), &quick(), &ds.registry.hash())
        .unwrap()
        .0
}

fn all_params(m: &TrainedModel) -> Vec<u64> {
    [m.embedder.params(), m.classifier.params(), m.projection.as_ref().unwrap().params()]
        .concat()
        .into_iter()
        .map(f64::to_bits)
        .collect()
}

#[test]
fn training_is_bit_reproducible() {
    let ds = dataset();
    let a = train(&ds, 7);
    let b = train(&ds, 7);
    assert_eq!(all_params(&a), all_params(&b));
    assert_ne!(all_params(&a), all_params(&train(&ds, 8)));
}

#[test]
fn user_prediction_ignores_row_order() {
    let ds = dataset();
    let model = train(&ds, 1);
    let user = &eligible_users(&ds, true)[0];
    let mut rows: Vec<&[Option<f64>]> =
        ds.rows.iter().filter(|r| &r.participant_id == user).map(|r| r.values.as_slice()).collect();
    let forward = predict_user(&model, &rows).unwrap();
    rows.reverse();
    let reversed = predict_user(&model, &rows).unwrap();
    let k = rows.len() / 3;
    rows.rotate_left(k);
    let rotated = predict_user(&model, &rows).unwrap();
    assert!((forward - reversed).abs() < 1e-12 && (forward - rotated).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&forward));
}

#[test]
fn balanced_data_makes_class_weighting_a_no_op() {
    let mut rng = seeded(4);
    let groups: Vec<usize> = (0..4).flat_map(|u| std::iter::repeat_n(u, 9)).collect();
    let labels: Vec<bool> = groups.iter().map(|&u| u % 2 == 0).collect();
    let x = Array2::from_shape_fn((groups.len(), 6), |_| rng.random_range(-1.0..1.0));
    let run = |class_balance: bool| {
        let config = TrainConfig {
            class_balance,
            finetune_epochs: 4,
            ..quick()
        };
        let emb = init_embedder(6, &config, &mut seeded(5)).unwrap();
        finetune(emb, x.view(), &groups, &labels, &config, &mut seeded(6)).unwrap()
    };
    let (weighted, plain) = (run(true), run(false));
    assert_eq!(weighted.positive_weight, 1.0);
    assert_eq!(weighted.embedder.params(), plain.embedder.params());
    assert_eq!(weighted.classifier.params(), plain.classifier.params());
}

#[test]
fn model_attributions_are_efficient_and_seeded() {
    let ds = dataset();
    let model = train(&ds, 2);
    let rows: Vec<&[Option<f64>]> = ds.rows.iter().take(6).map(|r| r.values.as_slice()).collect();
    let cfg = AttributionConfig { n_permutations: 8, seed: 3 };
    let a = attribute_rows(&model, &rows, &cfg).unwrap();
    let b = attribute_rows(&model, &rows, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows, 6);
    assert!(a.max_efficiency_gap < 1e-12, "gap {}", a.max_efficiency_gap);
    let c = attribute_rows(&model, &rows, &AttributionConfig { seed: 4, ..cfg }).unwrap();
    assert_ne!(a.sum_abs, c.sum_abs);
}

#[test]
fn exchangeable_features_share_credit_and_ignored_ones_get_none() {
    let f = |v: &[f64]| {
        let z = 0.8 * v[0] + 0.8 * v[1] + 0.6 * v[0] * v[1] * v[3] - 0.4 * v[3];
        1.0 / (1.0 + (-z).exp())
    };
    let x = [1.3, 1.3, -2.0, 0.7, 0.4];
    let base = [0.0; 5];
    let diffs: Vec<f64> = (0..30)
        .map(|s| {
            let a = shapley_sampling(pointwise(f), &x, &base, 7, &mut seeded(s)).unwrap();
            assert_eq!(a.values[2], 0.0);
            assert_eq!(a.values[4], 0.0);
            assert!(a.efficiency_gap().abs() < 1e-12);
            a.values[0] - a.values[1]
        })
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / n.sqrt() + 1e-12, "mean difference {mean}, sd {sd}");
}

proptest! {
    #[test]
    fn sampled_triplets_are_valid(sizes in prop::collection::vec(1usize..6, 2..8), seed in any::<u64>()) {
        let groups: Vec<usize> = sizes.iter().enumerate().flat_map(|(g, &s)| std::iter::repeat_n(g, s)).collect();
        let drawn = sample_triplets(&groups, 50, &mut seeded(seed));
        if sizes.iter().filter(|&&s| s >= 2).count() < 2 {
            prop_assert!(drawn.is_err());
            return Ok(());
        }
        for t in drawn.unwrap() {
            prop_assert_eq!(groups[t.anchor], groups[t.positive]);
            prop_assert!(t.anchor != t.positive);
            prop_assert!(groups[t.negative] != groups[t.anchor]);
        }
    }

    #[test]
    fn losses_are_non_negative_and_bounded(
        v in prop::collection::vec(-3.0f64..3.0, 12),
        margin in 0.0f64..2.0,
        logit in -30.0f64..30.0,
        label in any::<bool>(),
        w in 0.1f64..10.0,
    ) {
        let (a, rest) = v.split_at(4);
        let (p, n) = rest.split_at(4);
        let (loss, _) = triplet_margin_loss(a, p, n, margin);
        let dist: f64 = a.iter().zip(p).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(loss >= 0.0);
        prop_assert!(loss <= dist + margin + 1e-12);
        let (bce, _) = weighted_bce(logit, label, w);
        prop_assert!(bce >= 0.0 && bce.is_finite());
    }
}
