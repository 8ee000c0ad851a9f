use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Cohort, Gender, LabelThresholds, Outcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub outcome: Outcome,
    pub score_mean: f64,
    /// Sample standard deviation; 0 for a single participant.
    pub score_sd: f64,
    pub high_count: usize,
    pub high_pct: f64,
}

impl OutcomeSummary {
    /// `"31 (30.1%)"`.
    pub fn count_cell(&self) -> String {
        format!("{} ({:.1}%)", self.high_count, self.high_pct)
    }

    /// `"12.8±6.2"`.
    pub fn score_cell(&self) -> String {
        format!("{:.1}±{:.1}", self.score_mean, self.score_sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n: usize,
    pub female: usize,
    pub age_mean: f64,
    pub age_sd: f64,
    pub outcomes: Vec<OutcomeSummary>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn cohort_summary(cohort: &Cohort, thresholds: &LabelThresholds) -> Result<CohortSummary> {
    let ps = &cohort.participants;
    if ps.is_empty() {
        return Err(Error::InsufficientData("empty cohort".into()));
    }
    let n = ps.len();
    let ages: Vec<f64> = ps.iter().map(|p| p.age_years).collect();
    let (age_mean, age_sd) = mean_sd(&ages);
    let outcomes = Outcome::ALL
        .iter()
        .map(|&outcome| {
            let scores: Vec<f64> = ps
                .iter()
                .map(|p| match outcome {
                    Outcome::Sdq => p.sdq_total as f64,
                    Outcome::Insomnia => p.sci_total as f64,
                    Outcome::Suicidal => p.si_frequency as f64,
                    Outcome::Eating => p.ed15_mean,
                })
                .collect();
            let (score_mean, score_sd) = mean_sd(&scores);
            let high_count = ps.iter().filter(|p| p.labels(thresholds).get(outcome)).count();
            OutcomeSummary {
                outcome,
                score_mean,
                score_sd,
                high_count,
                high_pct: 100.0 * high_count as f64 / n as f64,
            }
        })
        .collect();
    Ok(CohortSummary {
        n,
        female: ps.iter().filter(|p| p.gender == Gender::Female).count(),
        age_mean,
        age_sd,
        outcomes,
    })
}

impl fmt::Display for CohortSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "N\t{}", self.n)?;
        writeln!(f, "Female\t{}", self.female)?;
        writeln!(f, "Age (years)\t{:.1}±{:.1}", self.age_mean, self.age_sd)?;
        for o in &self.outcomes {
            writeln!(f, "{} score (mean±SD)\t{}", o.outcome, o.score_cell())?;
            writeln!(f, "{} high risk, n (%)\t{}", o.outcome, o.count_cell())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::cohort::{Participant, Platform};

    fn participant(id: usize, sdq: u32) -> Participant {
        Participant {
            participant_id: format!("u{id}"),
            age_years: 16.0,
            gender: Gender::Female,
            platform: Platform::Ios,
            sdq_total: sdq,
            sci_total: 25,
            si_frequency: 0,
            ed15_mean: 1.0,
            enabled_sensors: BTreeSet::new(),
            study_start: None,
        }
    }

    #[test]
    fn table_count_format() {
        let participants = (0..103)
            .map(|i| participant(i, if i < 31 { 20 } else { 5 }))
            .collect();
        let cohort = Cohort {
            participants,
            ..Default::default()
        };
        let s = cohort_summary(&cohort, &LabelThresholds::default()).unwrap();
        assert_eq!(s.outcomes[0].count_cell(), "31 (30.1%)");
    }

    #[test]
    fn single_low_risk_participant() {
        let cohort = Cohort {
            participants: vec![participant(0, 3)],
            ..Default::default()
        };
        let s = cohort_summary(&cohort, &LabelThresholds::default()).unwrap();
        for o in &s.outcomes {
            assert_eq!(o.count_cell(), "0 (0.0%)");
            assert_eq!(o.score_sd, 0.0);
        }
    }

    #[test]
    fn empty_cohort_rejected() {
        assert!(cohort_summary(&Cohort::default(), &LabelThresholds::default()).is_err());
    }
}
