use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// SDQ total-difficulties score at or above 16 is high risk.
pub fn label_sdq(sdq_total: u32) -> bool {
    sdq_total >= 16
}

/// Sleep Condition Indicator at or below 16 is insomnia risk. For integer
/// scores this is the same cut as "below 17".
pub fn label_insomnia(sci_total: u32) -> bool {
    sci_total <= 16
}

/// Any non-zero frequency on the self-harm item.
pub fn label_suicidal(si_frequency: u32) -> bool {
    si_frequency >= 1
}

/// ED-15 mean strictly above 2.69 with the default thresholds.
pub fn label_eating(ed15_mean: f64) -> bool {
    LabelThresholds::default().eating(ed15_mean)
}

/// Tunable part of the labeling rules. Only the ED-15 cut is configurable;
/// the default is strict `> 2.69`, `inclusive` switches to `>=`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelThresholds {
    pub ed15_cutoff: f64,
    pub ed15_inclusive: bool,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        Self {
            ed15_cutoff: 2.69,
            ed15_inclusive: false,
        }
    }
}

impl LabelThresholds {
    pub fn eating(&self, ed15_mean: f64) -> bool {
        if self.ed15_inclusive {
            ed15_mean >= self.ed15_cutoff
        } else {
            ed15_mean > self.ed15_cutoff
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RiskLabels {
    pub sdq_high: bool,
    pub insomnia_high: bool,
    pub si_high: bool,
    pub ed_high: bool,
}

impl RiskLabels {
    pub fn from_scores(
        sdq_total: u32,
        sci_total: u32,
        si_frequency: u32,
        ed15_mean: f64,
        thresholds: &LabelThresholds,
    ) -> Self {
        Self {
            sdq_high: label_sdq(sdq_total),
            insomnia_high: label_insomnia(sci_total),
            si_high: label_suicidal(si_frequency),
            ed_high: thresholds.eating(ed15_mean),
        }
    }

    pub fn get(&self, outcome: Outcome) -> bool {
        match outcome {
            Outcome::Sdq => self.sdq_high,
            Outcome::Insomnia => self.insomnia_high,
            Outcome::Suicidal => self.si_high,
            Outcome::Eating => self.ed_high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Sdq,
    Insomnia,
    Suicidal,
    Eating,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::Sdq,
        Outcome::Insomnia,
        Outcome::Suicidal,
        Outcome::Eating,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Sdq => "sdq",
            Outcome::Insomnia => "insomnia",
            Outcome::Suicidal => "suicidal",
            Outcome::Eating => "eating",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown outcome `{s}` (expected sdq, insomnia, suicidal or eating)"))
    }
}
