use std::collections::BTreeSet;
use std::sync::Mutex;

use phenoscope_core::cohort::{LabelThresholds, Outcome};
use phenoscope_core::contrastive::TrainConfig;
use phenoscope_core::eval::{
    ablation_pretraining, auc, average_precision, compare_conditions, confusion, eligible_users, loso_folds, metrics,
    paired_t_test, run_experiment, welch_t_test, Condition, ConditionResult, Confusion, ExperimentConfig, FoldRecord,
    Metrics,
};
use phenoscope_core::features::{build_dataset, Dataset, ExtractionConfig, FeatureRegistry};
use phenoscope_core::synth::{generate, GeneratorConfig};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn quick_config(reps: usize, outcomes: &[Outcome]) -> ExperimentConfig {
    ExperimentConfig {
        train: TrainConfig {
            pretrain_epochs: 2,
            finetune_epochs: 3,
            triplets_per_epoch: 128,
            probe_triplets: 64,
            ..TrainConfig::default()
        },
        repetitions: reps,
        outcomes: outcomes.to_vec(),
        ..ExperimentConfig::default()
    }
}

fn small_dataset(n_users: usize, seed: u64) -> Dataset {
    let (cohort, _) = generate(&GeneratorConfig {
        n_users,
        seed,
        ..GeneratorConfig::default()
    })
    .unwrap();
    build_dataset(
        &cohort,
        &FeatureRegistry::default(),
        &ExtractionConfig::default(),
        &LabelThresholds::default(),
    )
    .unwrap()
}

/// Probability that a random positive outranks a random negative, ties counting half.
fn auc_by_pairs(probs: &[f64], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = probs.iter().zip(labels).filter(|e| *e.1).map(|e| *e.0).collect();
    let neg: Vec<f64> = probs.iter().zip(labels).filter(|e| !*e.1).map(|e| *e.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

/// Average precision by walking the distinct thresholds from the top.
fn ap_by_thresholds(probs: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == labels.len() {
        return None;
    }
    let mut thresholds: Vec<f64> = probs.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let called: Vec<bool> = probs.iter().zip(labels).filter(|e| *e.0 >= t).map(|e| *e.1).collect();
        let tp = called.iter().filter(|&&y| y).count() as f64;
        let recall = tp / n_pos as f64;
        ap += (recall - prev_recall) * tp / called.len() as f64;
        prev_recall = recall;
    }
    Some(ap)
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..40).prop_flat_map(|n| (prop::collection::vec(0u32..=64, n), prop::collection::vec(any::<bool>(), n)))
        .prop_map(|(k, y)| (k.into_iter().map(|k| f64::from(k) / 64.0).collect(), y))
}

proptest! {
    #[test]
    fn folds_partition_the_users(ids in prop::collection::hash_set("[a-z0-9]{1,6}", 2..60)) {
        let ids: Vec<String> = ids.into_iter().collect();
        let n = ids.len();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let plan = loso_folds(&refs).unwrap();
        prop_assert_eq!(plan.folds.len(), n);
        let all: BTreeSet<&str> = refs.iter().copied().collect();
        let tested: BTreeSet<&str> = plan.folds.iter().map(|f| f.test_user.as_str()).collect();
        prop_assert_eq!(&tested, &all);
        for f in &plan.folds {
            let train: BTreeSet<&str> = f.train_users.iter().map(String::as_str).collect();
            prop_assert_eq!(train.len(), n - 1);
            prop_assert!(!train.contains(f.test_user.as_str()));
            let mut union = train.clone();
            union.insert(f.test_user.as_str());
            prop_assert_eq!(&union, &all);
        }
    }

    #[test]
    fn auc_matches_pair_counting((probs, labels) in scored_labels()) {
        let got = auc(&probs, &labels).unwrap();
        let want = auc_by_pairs(&probs, &labels);
        match (got, want) {
            (Some(g), Some(w)) => prop_assert!((g - w).abs() < 1e-12, "{} vs {}", g, w),
            (g, w) => prop_assert_eq!(g, w),
        }
    }

    #[test]
    fn auc_invariant_under_monotone_maps((probs, labels) in scored_labels()) {
        let base = auc(&probs, &labels).unwrap();
        let maps: [fn(f64) -> f64; 3] = [f64::sqrt, |p| p * p * p, |p| 0.2 + 0.5 * p];
        for f in maps {
            let mapped: Vec<f64> = probs.iter().map(|&p| f(p)).collect();
            prop_assert_eq!(auc(&mapped, &labels).unwrap(), base);
        }
    }

    #[test]
    fn average_precision_matches_threshold_walk((probs, labels) in scored_labels()) {
        let got = average_precision(&probs, &labels).unwrap();
        match (got, ap_by_thresholds(&probs, &labels)) {
            (Some(g), Some(w)) => prop_assert!((g - w).abs() < 1e-12, "{} vs {}", g, w),
            (g, w) => prop_assert_eq!(g, w),
        }
    }

    #[test]
    fn metric_bundle_is_consistent_with_its_confusion((probs, labels) in scored_labels()) {
        let m = metrics(&probs, &labels).unwrap();
        let c = m.confusion;
        prop_assert_eq!(c.total() as usize, labels.len());
        let tp = probs.iter().zip(&labels).filter(|(&p, &y)| p >= 0.5 && y).count() as u32;
        prop_assert_eq!(c.tp, tp);
        let div = |a: u32, b: u32| if b == 0 { 0.0 } else { f64::from(a) / f64::from(b) };
        let sens = div(c.tp, c.tp + c.fn_);
        let spec = div(c.tn, c.tn + c.fp);
        let prec = div(c.tp, c.tp + c.fp);
        let npv = div(c.tn, c.tn + c.fn_);
        let h = |a: f64, b: f64| if a + b == 0.0 { 0.0 } else { 2.0 * a * b / (a + b) };
        prop_assert_eq!(m.sensitivity, sens);
        prop_assert_eq!(m.recall, sens);
        prop_assert_eq!(m.specificity, spec);
        prop_assert_eq!(m.precision, prec);
        prop_assert_eq!(m.balanced_accuracy, (sens + spec) / 2.0);
        prop_assert_eq!(m.f1, h(prec, sens));
        prop_assert_eq!(m.f1_macro, (h(prec, sens) + h(npv, spec)) / 2.0);
        prop_assert!((0.0..=1.0).contains(&m.balanced_accuracy));
        prop_assert_eq!(m.auc, auc(&probs, &labels).unwrap());
    }

    #[test]
    fn t_test_p_values_match_students_t(xs in prop::collection::vec(-5.0f64..5.0, 3..15), shift in -1.0f64..1.0) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.7 + shift + (i as f64 * 0.37).sin()).collect();
        if let Ok(t) = paired_t_test(&xs, &ys) {
            let dist = StudentsT::new(0.0, 1.0, t.df).unwrap();
            let want = 2.0 * (1.0 - dist.cdf(t.t.abs()));
            prop_assert!((t.p_value - want).abs() < 1e-9, "{} vs {}", t.p_value, want);
        }
        if let Ok(t) = welch_t_test(&xs, &ys[1..]) {
            let dist = StudentsT::new(0.0, 1.0, t.df).unwrap();
            let want = 2.0 * (1.0 - dist.cdf(t.t.abs()));
            prop_assert!((t.p_value - want).abs() < 1e-9, "{} vs {}", t.p_value, want);
        }
    }
}

#[test]
fn majority_and_perfect_predictors() {
    let labels = [true, false, false, false, true, false, false];
    let majority = vec![0.1; labels.len()];
    assert_eq!(metrics(&majority, &labels).unwrap().balanced_accuracy, 0.5);
    let always_positive = vec![0.9; labels.len()];
    assert_eq!(metrics(&always_positive, &labels).unwrap().balanced_accuracy, 0.5);
    let perfect: Vec<f64> = labels.iter().map(|&y| if y { 0.8 } else { 0.2 }).collect();
    let m = metrics(&perfect, &labels).unwrap();
    assert_eq!((m.balanced_accuracy, m.auc, m.f1_macro), (1.0, Some(1.0), 1.0));
    assert_eq!(confusion(&[0.5], &[true], 0.5).unwrap(), Confusion { tp: 1, ..Confusion::default() });
}

#[test]
fn held_out_users_never_reach_training() {
    let ds = small_dataset(10, 11);
    let cfg = quick_config(2, &[Outcome::Insomnia]);
    let records: Mutex<Vec<FoldRecord>> = Mutex::new(Vec::new());
    let observe = |r: &FoldRecord| records.lock().unwrap().push(r.clone());
    let runs = run_experiment(&ds, Condition::Combined, &cfg, Some(&observe)).unwrap();
    let users = &runs[0].users;
    let records = records.into_inner().unwrap();
    assert_eq!(records.len(), users.len() * 2);
    for r in &records {
        assert!(!r.training_users.contains(&r.test_user), "{} trained on itself", r.test_user);
        let expected: Vec<&String> = users.iter().filter(|u| **u != r.test_user).collect();
        let got: Vec<&String> = r.training_users.iter().collect();
        assert_eq!(got, expected);
    }
    let cells: BTreeSet<(usize, &str)> = records.iter().map(|r| (r.repetition, r.test_user.as_str())).collect();
    assert_eq!(cells.len(), records.len());
}

#[test]
fn experiments_are_deterministic_across_thread_counts() {
    let ds = small_dataset(8, 12);
    let cfg = quick_config(2, &[Outcome::Sdq, Outcome::Eating]);
    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(&ds, Condition::Combined, &cfg, None).unwrap())
    };
    let one = run_with(1);
    let three = run_with(3);
    assert_eq!(one, three);
    let bits = |runs: &[phenoscope_core::eval::RunResult]| -> Vec<u64> {
        runs.iter().flat_map(|r| r.probabilities.iter().flatten().map(|p| p.to_bits())).collect()
    };
    assert_eq!(bits(&one), bits(&three));

    let other_seed = ExperimentConfig { seed: 99, ..cfg.clone() };
    let moved = run_experiment(&ds, Condition::Combined, &other_seed, None).unwrap();
    assert_ne!(bits(&one), bits(&moved));
}

#[test]
fn stored_metrics_recompute_from_probabilities() {
    let ds = small_dataset(12, 3);
    let cfg = quick_config(3, &[Outcome::Sdq]);
    let run = run_experiment(&ds, Condition::Active, &cfg, None).unwrap().remove(0);
    assert_eq!(run.users, eligible_users(&ds, true));
    let result = ConditionResult::from_run(run).unwrap();
    for (m, p) in result.per_repetition.iter().zip(&result.probabilities) {
        let again: Metrics = metrics(p, &result.labels).unwrap();
        assert_eq!(*m, again);
        assert_eq!(Metrics::from_confusion(m.confusion).balanced_accuracy, m.balanced_accuracy);
    }
    assert_eq!(result.confusion.total() as usize, result.users.len());
    let ba = &result.summary["balanced_accuracy"];
    let mean = result.balanced_accuracies().iter().sum::<f64>() / 3.0;
    assert!((ba.mean - mean).abs() < 1e-15);
}

#[test]
fn identical_conditions_are_flagged_without_a_test() {
    let ds = small_dataset(12, 3);
    let cfg = quick_config(2, &[Outcome::Sdq]);
    let run = run_experiment(&ds, Condition::Combined, &cfg, None).unwrap().remove(0);
    let a = ConditionResult::from_run(run).unwrap();
    let mut b = a.clone();
    b.condition = Condition::Active;
    let rows = compare_conditions(&[a, b]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].p_value, None);
    assert!(rows[0].note.as_deref().unwrap().contains("no nonzero differences"));
}

#[test]
fn ablation_without_pretraining_in_either_arm_reports_zero_variance() {
    let ds = small_dataset(8, 15);
    let mut cfg = quick_config(2, &[Outcome::Insomnia]);
    cfg.train.pretrain_epochs = 0;
    let report = ablation_pretraining(&ds, &cfg).unwrap();
    assert_eq!(report.pooled_pretrained, report.pooled_no_pretraining);
    assert!(report.pooled.test.is_none());
    assert!(report.pooled.note.as_deref().unwrap().contains("zero variance"));
    assert_eq!(report.rows[0].pretrained, report.rows[0].no_pretraining);
}
