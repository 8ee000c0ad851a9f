use std::collections::{BTreeMap, BTreeSet};

use phenoscope_core::cohort::{Cohort, LabelThresholds, Outcome, Payload};
use phenoscope_core::synth::{generate, Attrition, GeneratorConfig};
use proptest::prelude::*;

#[test]
fn large_cohort_properties() {
    let config = GeneratorConfig {
        n_users: 1000,
        seed: 17,
        ..GeneratorConfig::default()
    };
    let (cohort, truth) = generate(&config).unwrap();
    let t = LabelThresholds::default();

    // Prevalence of score-derived labels tracks the configured rates.
    for o in Outcome::ALL {
        let k = cohort.participants.iter().filter(|p| p.labels(&t).get(o)).count();
        let rate = k as f64 / 1000.0;
        let want = config.prevalence_of(o);
        assert!((rate - want).abs() <= 0.03, "{o}: {rate} vs {want}");
    }

    // Labels derived from scores agree with the latent assignment.
    for (p, r) in cohort.participants.iter().zip(&truth.participants) {
        assert_eq!(p.participant_id, r.participant_id);
        for o in Outcome::ALL {
            assert_eq!(p.labels(&t).get(o), r.high_risk[o.index()], "{} {o}", p.participant_id);
        }
    }

    // Most user-days stay under 10 000 steps.
    let steps: Vec<u32> = cohort
        .passive
        .iter()
        .filter_map(|e| match e.payload {
            Payload::Steps { count, .. } => Some(count),
            _ => None,
        })
        .collect();
    assert!(steps.len() > 1000);
    let below = steps.iter().filter(|&&c| c < 10_000).count() as f64 / steps.len() as f64;
    assert!(below >= 0.60, "only {below:.2} of user-days below 10000 steps");
    let mean = steps.iter().map(|&c| f64::from(c)).sum::<f64>() / steps.len() as f64;
    let mut sorted = steps.clone();
    sorted.sort_unstable();
    let median = f64::from(sorted[sorted.len() / 2]);
    assert!(mean > median, "step counts should be right-skewed: mean {mean}, median {median}");

    // Active contributors per study day do not grow beyond sampling noise.
    let starts = cohort.study_starts();
    let mut by_day: BTreeMap<u32, BTreeSet<&str>> = BTreeMap::new();
    for r in &cohort.active {
        if let Some(d) = Cohort::day_index(starts[&r.participant_id], r.date) {
            by_day.entry(d).or_default().insert(&r.participant_id);
        }
    }
    let counts: Vec<f64> = (0..config.days).map(|d| by_day.get(&d).map_or(0, BTreeSet::len) as f64).collect();
    for w in counts.windows(2) {
        assert!(w[1] <= w[0] + 3.0 * w[0].sqrt() + 1.0, "contributors rose from {} to {}", w[0], w[1]);
    }
    assert!(counts[counts.len() - 1] < counts[0]);
}

#[test]
fn generation_is_deterministic_in_the_seed() {
    let config = GeneratorConfig {
        n_users: 15,
        seed: 5,
        ..GeneratorConfig::default()
    };
    let (a, ta) = generate(&config).unwrap();
    let (b, tb) = generate(&config).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    let (c, _) = generate(&GeneratorConfig { seed: 6, ..config }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn null_preset_plants_nothing() {
    let config = GeneratorConfig::null();
    assert!(config.effects.iter().all(|e| e.size == 0.0) || config.effects.is_empty());
    assert!(GeneratorConfig::preset("borderline").is_ok());
    assert!(GeneratorConfig::preset("nonsense").is_err());
}

proptest! {
    #[test]
    fn attrition_probability_never_rises(initial in 0.0f64..1.0, decay in 0.0f64..1.0, day in 0u32..60) {
        let a = Attrition { initial, decay };
        let (p0, p1) = (a.probability(day), a.probability(day + 1));
        prop_assert!(p1 <= p0);
        prop_assert!((0.0..=1.0).contains(&p0));
    }
}
