/// Gradient magnitudes below this are compared absolutely rather than relatively.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

/// Max relative error between `analytic` (the gradient at `params`) and
/// central differences of `loss_fn` with step `h`, over every parameter.
pub fn grad_check<F>(mut loss_fn: F, analytic: &[f64], params: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(analytic.len(), params.len(), "gradient length differs from parameter count");
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = loss_fn(&p);
        p[i] = orig - h;
        let down = loss_fn(&p);
        p[i] = orig;
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * h)));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_nearly_exact() {
        let f = |p: &[f64]| p.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x * x + x).sum();
        let p = [0.3, -1.2, 2.5, 0.0];
        let g: Vec<f64> = p.iter().enumerate().map(|(i, x)| 2.0 * (i as f64 + 1.0) * x + 1.0).collect();
        assert!(grad_check(f, &g, &p, 1e-5) < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let f = |p: &[f64]| p[0] * p[0];
        assert!(grad_check(f, &[1.0], &[1.0], 1e-5) > 0.4);
    }
}
