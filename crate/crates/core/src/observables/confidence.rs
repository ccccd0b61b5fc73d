//! Chi-square confidence intervals for a sample variance.

use crate::error::{Error, Result};
use crate::special::chi2_quantile;

/// Interval `[(N-1) s^2 / q_hi, (N-1) s^2 / q_lo]` with `q` the chi-square
/// quantiles on `N - 1` degrees of freedom at `(1 +- level) / 2`.
pub fn variance_confidence_interval(sample_variance: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InsufficientData(format!("confidence interval needs N >= 2, got {n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("must be in (0, 1), got {level}")));
    }
    if !(sample_variance >= 0.0) {
        return Err(Error::invalid("sample_variance", format!("must be >= 0, got {sample_variance}")));
    }
    let dof = (n - 1) as f64;
    let q_lo = chi2_quantile(0.5 * (1.0 - level), dof);
    let q_hi = chi2_quantile(0.5 * (1.0 + level), dof);
    Ok((dof * sample_variance / q_hi, dof * sample_variance / q_lo))
}
