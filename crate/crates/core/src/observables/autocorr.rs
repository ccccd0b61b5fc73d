//! Normalized ensemble autocorrelation `<x(t0 + tau) x(t0)> / <x(t0)^2>`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::TrajectoryArchive;

/// Particle groups used by the delete-one-group jackknife.
pub const JACKKNIFE_GROUPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    /// Delete-one-group jackknife standard errors over particles.
    pub std_errors: Vec<f64>,
}

/// Autocorrelation from a single reference time `t0`.
pub fn autocorrelation(archive: &TrajectoryArchive, t0: f64, lags: &[f64]) -> Result<Autocorrelation> {
    autocorrelation_over_origins(archive, &[t0], lags)
}

/// Autocorrelation with numerator and denominator summed over several
/// reference times (all inside the stationary window).
pub fn autocorrelation_over_origins(archive: &TrajectoryArchive, origins: &[f64], lags: &[f64]) -> Result<Autocorrelation> {
    if !archive.has_positions() {
        return Err(Error::InsufficientData(
            "autocorrelation needs retained per-particle positions".into(),
        ));
    }
    if origins.is_empty() {
        return Err(Error::invalid("t0", "need at least one reference time"));
    }
    let lookup = |t: f64| {
        archive
            .index_at(t)
            .ok_or_else(|| Error::invalid("lags", format!("no snapshot at t = {t}")))
    };
    let origin_idx: Vec<usize> = origins.iter().map(|&t| lookup(t)).collect::<Result<_>>()?;
    let n = archive.positions[origin_idx[0]].len();
    let groups = JACKKNIFE_GROUPS.min(n).max(1);
    let group_of = |i: usize| i * groups / n;

    // Per-group denominators sum_i x_i(t0)^2 over all origins.
    let mut den = vec![0.0; groups];
    for &o in &origin_idx {
        for (i, &x) in archive.positions[o].iter().enumerate() {
            den[group_of(i)] += x * x;
        }
    }
    let den_total: f64 = den.iter().sum();
    if !(den_total > 0.0) {
        return Err(Error::InsufficientData("ensemble is degenerate at the reference time".into()));
    }

    let mut values = Vec::with_capacity(lags.len());
    let mut std_errors = Vec::with_capacity(lags.len());
    for &lag in lags {
        let mut num = vec![0.0; groups];
        for (&t0, &o) in origins.iter().zip(&origin_idx) {
            let l = lookup(t0 + lag)?;
            for (i, (&x0, &xt)) in archive.positions[o].iter().zip(&archive.positions[l]).enumerate() {
                num[group_of(i)] += x0 * xt;
            }
        }
        let num_total: f64 = num.iter().sum();
        let c = num_total / den_total;
        let se = if groups > 1 {
            let g = groups as f64;
            let loo: Vec<f64> = (0..groups)
                .map(|k| (num_total - num[k]) / (den_total - den[k]))
                .collect();
            let mean = loo.iter().sum::<f64>() / g;
            ((g - 1.0) / g * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
        } else {
            f64::NAN
        };
        values.push(c);
        std_errors.push(se);
    }
    Ok(Autocorrelation {
        lags: lags.to_vec(),
        values,
        std_errors,
    })
}
