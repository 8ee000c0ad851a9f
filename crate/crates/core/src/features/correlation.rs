use crate::error::{Error, Result};

/// Pearson r over pairwise-complete observations. Undefined entries (fewer than
/// two shared observations or no spread) are NaN; the diagonal is 1.
pub fn correlation_matrix(rows: &[&[Option<f64>]]) -> Result<Vec<Vec<f64>>> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least 2 rows".into()));
    }
    let width = rows[0].len();
    let mut m = vec![vec![f64::NAN; width]; width];
    for i in 0..width {
        m[i][i] = 1.0;
        for j in (i + 1)..width {
            let pairs: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|r| Some((r[i]?, r[j]?)))
                .collect();
            let r = pearson(&pairs);
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    if pairs.len() < 2 {
        return f64::NAN;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}
