use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension [`shapley_exact`] will enumerate.
pub const EXACT_MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Signed contribution per feature; sums to `output_x - output_baseline`.
    pub values: Vec<f64>,
    pub baseline: Vec<f64>,
    pub n_permutations: usize,
    pub output_x: f64,
    pub output_baseline: f64,
}

impl Attribution {
    /// `Σ values − (f(x) − f(baseline))`.
    pub fn efficiency_gap(&self) -> f64 {
        self.values.iter().sum::<f64>() - (self.output_x - self.output_baseline)
    }
}

/// Permutation-sampling Shapley values.
///
/// `model_fn` scores a batch of points (one per row). For every permutation
/// the path from `baseline` to `x` is scored in one batch of `d + 1` rows,
/// switching one coordinate at a time in permutation order, and each step's
/// output change is credited to the switched feature.
///
/// Permutations are drawn in blocks of `2d`: a random order, each of its `d`
/// cyclic rotations, and the reverse of each rotation. Within a block every
/// feature takes every position equally often, and each reversed pair cancels
/// pairwise-interaction noise. Every order is still uniform on its own, so the
/// estimate stays unbiased.
pub fn shapley_sampling<F, R>(
    model_fn: F,
    x: &[f64],
    baseline: &[f64],
    n_permutations: usize,
    rng: &mut R,
) -> Result<Attribution>
where
    F: Fn(ArrayView2<f64>) -> Result<Vec<f64>>,
    R: rand::Rng + ?Sized,
{
    if n_permutations < 1 {
        return Err(Error::Config("n_permutations must be at least 1".into()));
    }
    let d = x.len();
    if baseline.len() != d {
        return Err(Error::Shape(format!("x has {d} features, baseline {}", baseline.len())));
    }
    let mut base: Vec<usize> = (0..d).collect();
    let mut order = base.clone();
    let mut totals = vec![0.0; d];
    let mut path = Array2::zeros((d + 1, d));
    let (mut output_x, mut output_baseline) = (f64::NAN, f64::NAN);
    for k in 0..n_permutations {
        let slot = k % (2 * d.max(1));
        if slot == 0 {
            base.shuffle(rng);
        }
        order.copy_from_slice(&base);
        order.rotate_left(slot / 2);
        if slot % 2 == 1 {
            order.reverse();
        }
        let mut point = baseline.to_vec();
        path.row_mut(0).iter_mut().zip(&point).for_each(|(p, v)| *p = *v);
        for (step, &j) in order.iter().enumerate() {
            point[j] = x[j];
            path.row_mut(step + 1).iter_mut().zip(&point).for_each(|(p, v)| *p = *v);
        }
        let out = model_fn(path.view())?;
        if out.len() != d + 1 {
            return Err(Error::Shape(format!("model returned {} outputs for {} points", out.len(), d + 1)));
        }
        for (step, &j) in order.iter().enumerate() {
            totals[j] += out[step + 1] - out[step];
        }
        output_baseline = out[0];
        output_x = out[d];
    }
    let n = n_permutations as f64;
    Ok(Attribution {
        values: totals.into_iter().map(|t| t / n).collect(),
        baseline: baseline.to_vec(),
        n_permutations,
        output_x,
        output_baseline,
    })
}

/// Exact Shapley values by enumerating every coalition, weighted by
/// `|S|! (d − |S| − 1)! / d!`.
pub fn shapley_exact<F>(model_fn: F, x: &[f64], baseline: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let d = x.len();
    if baseline.len() != d {
        return Err(Error::Shape(format!("x has {d} features, baseline {}", baseline.len())));
    }
    if d > EXACT_MAX_DIM {
        return Err(Error::Config(format!("exact enumeration limited to {EXACT_MAX_DIM} features")));
    }
    let point = |mask: usize| -> Vec<f64> {
        (0..d).map(|i| if mask >> i & 1 == 1 { x[i] } else { baseline[i] }).collect()
    };
    let values: Vec<f64> = (0..1usize << d).map(|m| model_fn(&point(m))).collect();
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        for mask in 0..1usize << d {
            if mask >> i & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact(s) * fact(d - s - 1) / fact(d);
            *p += w * (values[mask | 1 << i] - values[mask]);
        }
    }
    Ok(phi)
}

/// Adapts a pointwise function to the batch interface of [`shapley_sampling`].
pub fn pointwise<F: Fn(&[f64]) -> f64>(f: F) -> impl Fn(ArrayView2<f64>) -> Result<Vec<f64>> {
    move |batch: ArrayView2<f64>| Ok(batch.rows().into_iter().map(|r| f(&r.to_vec())).collect())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::seeded;
    use proptest::prelude::*;

    #[test]
    fn linear_model_is_exact_for_one_permutation() {
        let w = [2.0, -1.0, 0.5];
        let f = pointwise(move |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum());
        let a = shapley_sampling(f, &[1.0, 2.0, 3.0], &[0.0, 1.0, -1.0], 1, &mut seeded(1)).unwrap();
        assert_eq!(a.values, vec![2.0, -1.0, 2.0]);
    }

    #[test]
    fn null_difference_gives_zero() {
        let f = pointwise(|v: &[f64]| v[0] * v[1] + v[2].sin());
        let x = [0.3, -0.2, 1.1];
        let a = shapley_sampling(f, &x, &x, 10, &mut seeded(2)).unwrap();
        assert!(a.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_permutations_rejected() {
        let f = pointwise(|v: &[f64]| v[0]);
        assert!(shapley_sampling(f, &[1.0], &[0.0], 0, &mut seeded(0)).is_err());
    }

    #[test]
    fn antithetic_pair_is_exact_for_pairwise_models() {
        let f = |v: &[f64]| 0.3 * v[0] + v[0] * v[1] - 2.0 * v[1] * v[2] + v[3];
        let (x, b) = ([1.0, -0.5, 2.0, 0.7], [0.2, 0.4, -1.0, 0.0]);
        let exact = shapley_exact(f, &x, &b).unwrap();
        let a = shapley_sampling(pointwise(f), &x, &b, 2, &mut seeded(4)).unwrap();
        for (s, e) in a.values.iter().zip(&exact) {
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn full_block_is_exact_for_three_features() {
        let f = |v: &[f64]| (v[0] * v[1] * v[2] + v[0]).tanh() + v[1] * v[2];
        let (x, b) = ([1.0, -0.5, 2.0], [0.2, 0.4, -1.0]);
        let exact = shapley_exact(f, &x, &b).unwrap();
        let a = shapley_sampling(pointwise(f), &x, &b, 6, &mut seeded(9)).unwrap();
        for (s, e) in a.values.iter().zip(&exact) {
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_pairwise_interaction_splits_evenly() {
        let phi = shapley_exact(|v| v[0] * v[1], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(phi, vec![0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn efficiency_and_dummy(x in prop::collection::vec(-3.0f64..3.0, 4), b in prop::collection::vec(-3.0f64..3.0, 4), seed in 0u64..1000) {
            // Feature 3 is ignored by the model.
            let f = pointwise(|v: &[f64]| (v[0] * v[1]).tanh() + v[2].powi(2) * 0.3 - v[1]);
            let a = shapley_sampling(f, &x, &b, 7, &mut seeded(seed)).unwrap();
            prop_assert!(a.efficiency_gap().abs() < 1e-12);
            prop_assert_eq!(a.values[3], 0.0);
        }
    }
}
