//! Snapshot moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased (N - 1) variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Mean, unbiased variance and standardized third and fourth central
/// moments (the latter two use the biased second moment, so a constant
/// shift or scale of the data leaves them unchanged).
pub fn ensemble_moments(x: &[f64]) -> Result<Moments> {
    let n = x.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("moments need at least 4 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / (nf - 1.0);
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(Moments {
        mean,
        variance,
        skewness,
        excess_kurtosis,
    })
}
