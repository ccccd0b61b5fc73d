//! Step-response calibration: after a stiffness step the variance relaxes
//! as `S(t) = S_inf + (S_0 - S_inf) exp(-2 kappa_f t)`.

use serde::{Deserialize, Serialize};

use super::linfit::weighted_least_squares;
use crate::error::{Error, Result};

/// Minimum span of the series in units of the variance relaxation time
/// `1 / (2 kappa)`.
pub const MIN_RELAXATION_SPAN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFit {
    pub kappa: f64,
    pub s0: f64,
    pub s_inf: f64,
    pub residual_rms: f64,
}

// For fixed kappa the model is linear in (S_inf, S_0 - S_inf).
fn profile(times: &[f64], values: &[f64], kappa: f64) -> Option<(f64, f64, f64)> {
    let rows: Vec<Vec<f64>> = times.iter().map(|&t| vec![1.0, (-2.0 * kappa * t).exp()]).collect();
    let (b, rss) = weighted_least_squares(&rows, values, &vec![1.0; times.len()]).ok()?;
    Some((b[0], b[0] + b[1], rss))
}

/// Fits the relaxation law to samples taken at `times` measured from the step.
pub fn step_relaxation_fit(times: &[f64], values: &[f64]) -> Result<RelaxationFit> {
    if times.len() != values.len() {
        return Err(Error::TimeBaseMismatch(format!("{} times for {} values", times.len(), values.len())));
    }
    if times.len() < 4 {
        return Err(Error::InsufficientData(format!("relaxation fit needs at least 4 samples, got {}", times.len())));
    }
    if times.iter().any(|t| *t < 0.0) {
        return Err(Error::invalid("times", "samples must not precede the step"));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(Error::InsufficientData("relaxation series has zero span".into()));
    }
    let rss_at = |ln_k: f64| profile(times, values, ln_k.exp()).map_or(f64::INFINITY, |p| p.2);

    // Coarse log-spaced scan, then golden section around the best point.
    let dt_min = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let (lo, hi) = ((0.01 / span).ln(), (10.0 / dt_min.max(1e-12)).ln());
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let costs: Vec<f64> = grid.iter().map(|&g| rss_at(g)).collect();
    let best = (0..=n).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (rss_at(c), rss_at(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = rss_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = rss_at(d);
        }
    }
    let kappa = (0.5 * (a + b)).exp();
    let (s_inf, s0, rss) = profile(times, values, kappa).ok_or_else(|| Error::FitNonConvergence {
        reason: "relaxation profile is singular".into(),
        residual: f64::NAN,
    })?;
    let residual_rms = (rss / times.len() as f64).sqrt();
    if best == 0 || best == n {
        return Err(Error::FitNonConvergence {
            reason: format!("relaxation rate at the edge of the search range (kappa = {kappa})"),
            residual: residual_rms,
        });
    }
    if 2.0 * kappa * span < MIN_RELAXATION_SPAN {
        return Err(Error::InsufficientData(format!(
            "series spans {:.2} relaxation times, need {MIN_RELAXATION_SPAN}",
            2.0 * kappa * span
        )));
    }
    Ok(RelaxationFit {
        kappa,
        s0,
        s_inf,
        residual_rms,
    })
}

/// First sample time at or after `after` from which the series stays
/// within `tolerance` (relative) of `target` until the end.
pub fn settling_time(times: &[f64], values: &[f64], target: f64, tolerance: f64, after: f64) -> Option<f64> {
    let mut candidate = None;
    for (&t, &v) in times.iter().zip(values) {
        if t < after {
            continue;
        }
        if ((v - target) / target).abs() <= tolerance {
            candidate.get_or_insert(t);
        } else {
            candidate = None;
        }
    }
    candidate
}
