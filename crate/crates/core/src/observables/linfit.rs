//! Small dense weighted least squares.

use crate::error::{Error, Result};

/// Solution of `min sum_i w_i (y_i - row_i . beta)^2` by Householder QR,
/// with the weighted residual sum of squares.
pub(crate) fn weighted_least_squares(rows: &[Vec<f64>], y: &[f64], weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n < p || p == 0 {
        return Err(Error::InsufficientData(format!("least squares with {n} rows for {p} parameters")));
    }
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .zip(weights)
        .map(|(r, w)| r.iter().map(|v| v * w.sqrt()).collect())
        .collect();
    let mut b: Vec<f64> = y.iter().zip(weights).map(|(v, w)| v * w.sqrt()).collect();

    for k in 0..p {
        let norm = (k..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InsufficientData("least squares design is rank deficient".into()));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..p {
            let dot: f64 = (k..n).map(|i| v[i - k] * a[i][j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                a[i][j] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..n).map(|i| v[i - k] * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..n {
            b[i] -= f * v[i - k];
        }
    }

    let scale = (0..p).map(|k| a[k][k].abs()).fold(0.0, f64::max);
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        if a[k][k].abs() <= 1e-13 * scale {
            return Err(Error::InsufficientData("least squares design is rank deficient".into()));
        }
        let s: f64 = (k + 1..p).map(|j| a[k][j] * beta[j]).sum();
        beta[k] = (b[k] - s) / a[k][k];
    }
    let rss = b[p..].iter().map(|r| r * r).sum();
    Ok((beta, rss))
}
