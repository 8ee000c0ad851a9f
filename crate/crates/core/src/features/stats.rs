use serde::{Deserialize, Serialize};

/// Summary statistics of one sample. Standard deviation is the population SD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatBlock {
    pub total: f64,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub max: f64,
    pub min: f64,
}

/// `None` for an empty sample.
pub fn stat_block(samples: &[f64]) -> Option<StatBlock> {
    if samples.is_empty() {
        return None;
    }
    let total: f64 = samples.iter().sum();
    let mean = total / samples.len() as f64;
    Some(StatBlock {
        total,
        mean,
        median: median(samples)?,
        sd: population_sd(samples, mean),
        max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: samples.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Middle value; the average of the two middle values for even counts.
pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

pub fn mean(samples: &[f64]) -> Option<f64> {
    (!samples.is_empty()).then(|| samples.iter().sum::<f64>() / samples.len() as f64)
}

pub(crate) fn population_sd(samples: &[f64], mean: f64) -> f64 {
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / samples.len() as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points() {
        let s = stat_block(&[2.0, 4.0]).unwrap();
        assert_eq!((s.total, s.mean, s.median, s.sd), (6.0, 3.0, 3.0, 1.0));
        assert_eq!((s.min, s.max), (2.0, 4.0));
    }

    #[test]
    fn singleton() {
        let s = stat_block(&[5.0]).unwrap();
        assert_eq!((s.total, s.mean, s.median, s.sd), (5.0, 5.0, 5.0, 0.0));
    }

    #[test]
    fn empty_is_missing() {
        assert!(stat_block(&[]).is_none());
        assert!(median(&[]).is_none());
    }
}
