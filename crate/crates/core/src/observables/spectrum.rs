//! Position power spectra and Lorentzian trap calibration.
//!
//! For an overdamped particle in a harmonic trap the one-sided PSD is
//! `S(f) = D / (pi^2 (f_c^2 + f^2))` with roll-off `f_c = kappa / (2 pi)`.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::digamma;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub frequencies: Vec<f64>,
    /// One-sided PSD; integrates over frequency to the trace variance.
    pub psd: Vec<f64>,
    pub segments: usize,
}

/// Averaged periodogram over non-overlapping, mean-removed segments.
pub fn compute_psd(trace: &[f64], sample_rate: f64, segment_len: usize) -> Result<SpectrumEstimate> {
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(Error::invalid("sample_rate", format!("must be positive, got {sample_rate}")));
    }
    if segment_len < 4 {
        return Err(Error::invalid("segment_len", format!("must be at least 4, got {segment_len}")));
    }
    let segments = trace.len() / segment_len;
    if segments < 2 {
        return Err(Error::InsufficientData(format!(
            "trace of {} samples holds fewer than 2 segments of {segment_len}",
            trace.len()
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let half = segment_len / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    for seg in trace.chunks_exact(segment_len).take(segments) {
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for (b, &x) in buf.iter_mut().zip(seg) {
            *b = Complex::new(x - mean, 0.0);
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
    }
    let dt = 1.0 / sample_rate;
    let norm = dt / (segment_len as f64 * segments as f64);
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            // Fold negative frequencies, except at DC and Nyquist.
            let fold = if k == 0 || (segment_len.is_multiple_of(2) && k == half) { 1.0 } else { 2.0 };
            fold * p * norm
        })
        .collect();
    let df = sample_rate / segment_len as f64;
    Ok(SpectrumEstimate {
        frequencies: (0..=half).map(|k| k as f64 * df).collect(),
        psd,
        segments,
    })
}

impl SpectrumEstimate {
    /// `sum_k S(f_k) df`, the variance captured by the spectrum.
    pub fn total_power(&self) -> f64 {
        let df = self.frequencies.get(1).copied().unwrap_or(0.0);
        self.psd.iter().sum::<f64>() * df
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub fc: f64,
    pub d: f64,
    /// `2 pi f_c` (gamma = 1).
    pub kappa: f64,
    /// Weighted RMS residual on log-PSD.
    pub residual_rms: f64,
}

pub fn lorentzian(f: f64, fc: f64, d: f64) -> f64 {
    d / (PI * PI * (fc * fc + f * f))
}

/// Fits `D / (pi^2 (f_c^2 + f^2))` to the spectrum on `(0, f_max]`.
///
/// Least squares on log-PSD with weights `1/f`, so every frequency decade
/// counts equally. Starts from the exact linear inversion of `1/S` and
/// refines with damped Gauss-Newton. The log of an average of `K`
/// periodograms is biased by `psi(K) - ln K`, which is removed from `D`.
pub fn fit_lorentzian(spectrum: &SpectrumEstimate, f_max: Option<f64>) -> Result<LorentzianFit> {
    let upper = f_max.unwrap_or(f64::INFINITY);
    let pts: Vec<(f64, f64)> = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.psd)
        .filter(|(&f, &p)| f > 0.0 && f <= upper && p > 0.0)
        .map(|(&f, &p)| (f, p))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable spectral points", pts.len())));
    }
    let (f_lo, f_hi) = (pts[0].0, pts[pts.len() - 1].0);
    if f_hi / f_lo < 10.0 {
        return Err(Error::InsufficientData(format!(
            "fit band [{f_lo}, {f_hi}] spans less than a decade"
        )));
    }

    let w: Vec<f64> = pts.iter().map(|(f, _)| 1.0 / f).collect();
    let y: Vec<f64> = pts.iter().map(|(_, p)| p.ln()).collect();
    let ln_pi2 = 2.0 * PI.ln();
    // theta = (ln D, ln f_c^2)
    let residuals = |ln_d: f64, u: f64| -> Vec<f64> {
        let fc2 = u.exp();
        pts.iter()
            .zip(&y)
            .map(|((f, _), yk)| yk - (ln_d - ln_pi2 - (fc2 + f * f).ln()))
            .collect()
    };
    let cost = |r: &[f64]| r.iter().zip(&w).map(|(r, w)| w * r * r).sum::<f64>();

    // 1/S = (pi^2/D) f_c^2 + (pi^2/D) f^2 is linear in f^2.
    let (mut ln_d, mut u) = {
        let rows: Vec<Vec<f64>> = pts.iter().map(|(f, _)| vec![1.0, f * f]).collect();
        let inv: Vec<f64> = pts.iter().map(|(_, p)| 1.0 / p).collect();
        let wts: Vec<f64> = pts.iter().map(|(f, p)| p * p / f).collect();
        match super::linfit::weighted_least_squares(&rows, &inv, &wts) {
            Ok((b, _)) if b[0] > 0.0 && b[1] > 0.0 => ((PI * PI / b[1]).ln(), (b[0] / b[1]).ln()),
            _ => {
                let fc2 = (f_lo * f_hi).max(f64::MIN_POSITIVE);
                let u0 = fc2.ln();
                let mean_ln_d =
                    y.iter().zip(&pts).map(|(yk, (f, _))| yk + ln_pi2 + (fc2 + f * f).ln()).sum::<f64>() / y.len() as f64;
                (mean_ln_d, u0)
            }
        }
    };

    let mut r = residuals(ln_d, u);
    let mut c = cost(&r);
    let mut lambda = 1e-6;
    let mut converged = false;
    for _ in 0..200 {
        // Jacobian of the model: d/d ln D = 1, d/du = -f_c^2 / (f_c^2 + f^2).
        let fc2 = u.exp();
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (((f, _), rk), wk) in pts.iter().zip(&r).zip(&w) {
            let j1 = 1.0;
            let j2 = -fc2 / (fc2 + f * f);
            a11 += wk * j1 * j1;
            a12 += wk * j1 * j2;
            a22 += wk * j2 * j2;
            g1 += wk * j1 * rk;
            g2 += wk * j2 * rk;
        }
        let mut improved = false;
        for _ in 0..30 {
            let (b11, b22) = (a11 * (1.0 + lambda), a22 * (1.0 + lambda));
            let det = b11 * b22 - a12 * a12;
            if det == 0.0 || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let d1 = (b22 * g1 - a12 * g2) / det;
            let d2 = (b11 * g2 - a12 * g1) / det;
            let (nd, nu) = (ln_d + d1, u + d2);
            let nr = residuals(nd, nu);
            let nc = cost(&nr);
            if nc <= c {
                let small = d1.abs() < 1e-15 * (1.0 + ln_d.abs()) && d2.abs() < 1e-15 * (1.0 + u.abs());
                ln_d = nd;
                u = nu;
                r = nr;
                let settled = (c - nc) <= 1e-15 * c.max(f64::MIN_POSITIVE);
                c = nc;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                converged = small || settled;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step exists: we are at the minimum to rounding.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let wsum: f64 = w.iter().sum();
    let residual_rms = (c / wsum).sqrt();
    if !converged || !u.is_finite() || !ln_d.is_finite() {
        return Err(Error::FitNonConvergence {
            reason: "Lorentzian least squares did not settle".into(),
            residual: residual_rms,
        });
    }
    let fc = (0.5 * u).exp();
    if fc < f_lo || fc > f_hi {
        return Err(Error::FitNonConvergence {
            reason: format!("roll-off {fc} outside the fit band [{f_lo}, {f_hi}]"),
            residual: residual_rms,
        });
    }
    let k = spectrum.segments as f64;
    let log_bias = if spectrum.segments > 0 { digamma(k) - k.ln() } else { 0.0 };
    let d = (ln_d - log_bias).exp();
    Ok(LorentzianFit {
        fc,
        d,
        kappa: 2.0 * PI * fc,
        residual_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterRng, Stream};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn white_noise_is_flat() {
        let rng = CounterRng::new(8);
        let x: Vec<f64> = (0..1u64 << 16).map(|i| rng.normal(Stream::Synthetic, i, 0)).collect();
        let s = compute_psd(&x, 1.0, 256).unwrap();
        // Unit-variance white noise sampled at rate 1: S = 2 on (0, 1/2).
        let interior = &s.psd[1..s.psd.len() - 1];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert_abs_diff_eq!(mean, 2.0, epsilon = 0.05);
        // Each bin averages 256 periodograms: relative spread 1/16.
        assert!(interior.iter().all(|p| (p - 2.0).abs() < 5.0 * 2.0 / 16.0));
        assert_abs_diff_eq!(s.total_power(), 1.0, epsilon = 0.02);
    }

    #[test]
    fn psd_errors() {
        assert!(compute_psd(&[0.0; 100], 1.0, 64).is_err());
        assert!(compute_psd(&[0.0; 100], 0.0, 16).is_err());
        assert!(compute_psd(&[0.0; 100], 1.0, 2).is_err());
    }

    #[test]
    fn exact_lorentzian_is_recovered() {
        let (fc, d) = (0.159_154_943, 0.8);
        let frequencies: Vec<f64> = (0..=512).map(|k| k as f64 * 0.01).collect();
        let psd = frequencies.iter().map(|&f| lorentzian(f, fc, d)).collect();
        let s = SpectrumEstimate {
            frequencies,
            psd,
            segments: 0,
        };
        let fit = fit_lorentzian(&s, None).unwrap();
        assert_relative_eq!(fit.fc, fc, max_relative = 1e-12);
        assert_relative_eq!(fit.d, d, max_relative = 1e-12);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn narrow_band_is_rejected() {
        let frequencies: Vec<f64> = (0..=20).map(|k| 1.0 + k as f64 * 0.1).collect();
        let psd = frequencies.iter().map(|&f| lorentzian(f, 1.0, 1.0)).collect();
        let s = SpectrumEstimate {
            frequencies,
            psd,
            segments: 4,
        };
        assert!(fit_lorentzian(&s, None).is_err());
    }
}
