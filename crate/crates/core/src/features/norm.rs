use serde::{Deserialize, Serialize};

use super::stats::median;

/// Per-feature statistics fitted on a training fold.
///
/// Missing values are imputed with the fold median before the z-score; a
/// feature with no spread (including one that is missing everywhere) maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub constant: Vec<bool>,
}

const CONSTANT_TOL: f64 = 1e-12;

pub fn fit_norm(rows: &[&[Option<f64>]]) -> NormStats {
    let width = rows.first().map_or(0, |r| r.len());
    let mut stats = NormStats {
        medians: Vec::with_capacity(width),
        means: Vec::with_capacity(width),
        sds: Vec::with_capacity(width),
        constant: Vec::with_capacity(width),
    };
    for j in 0..width {
        let present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
        let fill = median(&present).unwrap_or(0.0);
        let col: Vec<f64> = rows.iter().map(|r| r[j].unwrap_or(fill)).collect();
        let n = col.len().max(1) as f64;
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        stats.medians.push(fill);
        stats.means.push(mean);
        stats.sds.push(sd);
        stats.constant.push(sd <= CONSTANT_TOL * mean.abs().max(1.0));
    }
    stats
}

impl NormStats {
    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn apply_one(&self, row: &[Option<f64>]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.constant[j] {
                    0.0
                } else {
                    (v.unwrap_or(self.medians[j]) - self.means[j]) / self.sds[j]
                }
            })
            .collect()
    }

    /// Columns that carry information in this fold.
    pub fn informative_columns(&self) -> Vec<usize> {
        (0..self.width()).filter(|&j| !self.constant[j]).collect()
    }

    /// Normalized training medians, the reference point for attributions.
    pub fn median_baseline(&self) -> Vec<f64> {
        let medians: Vec<Option<f64>> = self.medians.iter().map(|&m| Some(m)).collect();
        self.apply_one(&medians)
    }
}

pub fn apply_norm(rows: &[&[Option<f64>]], stats: &NormStats) -> Vec<Vec<f64>> {
    rows.iter().map(|r| stats.apply_one(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn z_score_definition() {
        // mean 10, population sd 2
        let rows: Vec<Vec<Option<f64>>> = [8.0, 12.0].iter().map(|&x| vec![Some(x)]).collect();
        let refs: Vec<&[Option<f64>]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = fit_norm(&refs);
        assert_eq!(s.apply_one(&[Some(14.0)]), vec![2.0]);
    }

    #[test]
    fn all_missing_column_is_zero() {
        let rows = [vec![None, Some(1.0)], vec![None, Some(3.0)]];
        let refs: Vec<&[Option<f64>]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = fit_norm(&refs);
        assert!(s.constant[0] && !s.constant[1]);
        assert_eq!(apply_norm(&refs, &s).iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(s.informative_columns(), vec![1]);
    }

    #[test]
    fn missing_imputed_with_median() {
        let rows = [vec![Some(1.0)], vec![Some(2.0)], vec![Some(10.0)], vec![None]];
        let refs: Vec<&[Option<f64>]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = fit_norm(&refs);
        assert_eq!(s.medians[0], 2.0);
        assert_eq!(s.apply_one(&[None]), s.apply_one(&[Some(2.0)]));
    }

    #[test]
    fn normalized_random_columns_are_standard() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<Option<f64>>> = (0..200)
            .map(|_| {
                (0..6)
                    .map(|j| (rng.random::<f64>() > 0.2).then(|| rng.random::<f64>() * (j as f64 + 1.0) * 50.0 - 3.0))
                    .collect()
            })
            .collect();
        let refs: Vec<&[Option<f64>]> = rows.iter().map(|r| r.as_slice()).collect();
        let z = apply_norm(&refs, &fit_norm(&refs));
        for j in 0..6 {
            let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, "col {j}: {m} {sd}");
        }
    }
}
