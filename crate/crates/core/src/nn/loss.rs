pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrads {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

fn diff_norm(a: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    (d, n)
}

/// `max(0, |a-p| - |a-n| + margin)` with gradients for all three embeddings.
/// A zero distance contributes a zero subgradient.
pub fn triplet_margin_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> (f64, TripletGrads) {
    assert!(anchor.len() == positive.len() && anchor.len() == negative.len(), "embedding widths differ");
    let (dp, np) = diff_norm(anchor, positive);
    let (dn, nn) = diff_norm(anchor, negative);
    let loss = (np - nn + margin).max(0.0);
    let k = anchor.len();
    let mut g = TripletGrads {
        anchor: vec![0.0; k],
        positive: vec![0.0; k],
        negative: vec![0.0; k],
    };
    if loss > 0.0 {
        for i in 0..k {
            let up = if np > 0.0 { dp[i] / np } else { 0.0 };
            let un = if nn > 0.0 { dn[i] / nn } else { 0.0 };
            g.anchor[i] = up - un;
            g.positive[i] = -up;
            g.negative[i] = un;
        }
    }
    (loss, g)
}

/// Class-weighted binary cross-entropy on a logit; returns the loss and d loss / d logit.
pub fn weighted_bce(logit: f64, label: bool, positive_weight: f64) -> (f64, f64) {
    if label {
        // -ln σ(z) = softplus(-z)
        (positive_weight * softplus(-logit), positive_weight * (sigmoid(logit) - 1.0))
    } else {
        // -ln(1 - σ(z)) = softplus(z)
        (softplus(logit), sigmoid(logit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_examples() {
        let a = [0.0, 0.0];
        assert_eq!(triplet_margin_loss(&a, &a, &[2.0, 0.0], 1.0).0, 0.0);
        let (l, g) = triplet_margin_loss(&a, &[2.0, 0.0], &[0.0, 1.0], 1.0);
        assert_eq!(l, 2.0);
        assert_eq!(g.positive, vec![1.0, 0.0]);
        assert_eq!(g.negative, vec![0.0, -1.0]);
        assert_eq!(g.anchor, vec![-1.0, 1.0]);
    }

    #[test]
    fn triplet_inactive_has_zero_grads() {
        let (l, g) = triplet_margin_loss(&[0.0], &[0.1], &[5.0], 1.0);
        assert_eq!(l, 0.0);
        assert!(g.anchor.iter().chain(&g.positive).chain(&g.negative).all(|&x| x == 0.0));
    }

    #[test]
    fn triplet_all_coincident_is_margin() {
        let (l, g) = triplet_margin_loss(&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], 0.5);
        assert_eq!(l, 0.5);
        assert!(g.anchor.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bce_examples() {
        assert!((weighted_bce(0.0, true, 1.0).0 - std::f64::consts::LN_2).abs() < 1e-15);
        let (l, g) = weighted_bce(30.0, true, 1.0);
        assert!((0.0..1e-12).contains(&l) && g.abs() < 1e-12);
        let (l, _) = weighted_bce(-800.0, true, 2.0);
        assert!((l - 1600.0).abs() < 1e-9);
        let (l, _) = weighted_bce(800.0, false, 2.0);
        assert!((l - 800.0).abs() < 1e-9);
        assert_eq!(weighted_bce(0.3, false, 7.0), weighted_bce(0.3, false, 1.0));
    }

    #[test]
    fn sigmoid_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-1000.0) >= 0.0 && sigmoid(1000.0) <= 1.0);
    }
}
