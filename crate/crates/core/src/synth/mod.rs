//! Synthetic cohorts with planted couplings between risk status and behavior.

mod config;
mod generate;

use rand::seq::SliceRandom;

pub use config::{
    default_effects, Attrition, Channel, ConsentModel, EffectMode, GeneratorConfig, PlantedEffect,
};
pub use generate::{generate, latent_thresholds, GroundTruth, TruthRecord, MAX_DAILY_STEPS};

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::nn::seeded;

/// Moves questionnaire scores between participants: participant `i` receives
/// the scores of participant `perm[i]`. Events are untouched.
pub fn permute_labels_with(cohort: &Cohort, perm: &[usize]) -> Result<Cohort> {
    let n = cohort.participants.len();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&j| j >= n || std::mem::replace(&mut seen[j], true)) {
        return Err(Error::InvalidInput(format!("not a permutation of {n} participants")));
    }
    let mut out = cohort.clone();
    for (i, &j) in perm.iter().enumerate() {
        let src = &cohort.participants[j];
        let dst = &mut out.participants[i];
        dst.sdq_total = src.sdq_total;
        dst.sci_total = src.sci_total;
        dst.si_frequency = src.si_frequency;
        dst.ed15_mean = src.ed15_mean;
    }
    Ok(out)
}

/// Uniformly random score permutation, which breaks any label/behavior coupling.
pub fn permute_labels(cohort: &Cohort, seed: u64) -> Cohort {
    let mut perm: Vec<usize> = (0..cohort.participants.len()).collect();
    perm.shuffle(&mut seeded(seed));
    permute_labels_with(cohort, &perm).expect("shuffle yields a permutation")
}
