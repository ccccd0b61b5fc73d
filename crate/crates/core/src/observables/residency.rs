//! Well-to-well jumps in a double well, detected with a hysteresis band.
//!
//! A jump is recorded only when a trace goes from beyond `-b` to beyond
//! `+b` (or back), with `b = band_fraction * x_min`. Excursions that stay
//! inside the band never create or destroy jumps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::{Ensemble, FieldView, StepObserver};

pub const DEFAULT_BAND_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Well {
    Left,
    Right,
}

impl Well {
    /// `-1` for the left well, `+1` for the right.
    pub fn sign(self) -> i8 {
        match self {
            Well::Left => -1,
            Well::Right => 1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            -1 => Some(Well::Left),
            1 => Some(Well::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidencyRecord {
    /// Time between successive recorded jumps.
    pub durations: Vec<f64>,
    /// Well occupied during each dwell.
    pub labels: Vec<Well>,
    pub band: f64,
    /// Set when fewer than two jumps were seen.
    pub diagnostic: Option<String>,
}

impl ResidencyRecord {
    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn mean_duration(&self) -> Option<f64> {
        (!self.durations.is_empty()).then(|| self.durations.iter().sum::<f64>() / self.durations.len() as f64)
    }

    /// Concatenates per-trajectory records in order.
    pub fn pooled(records: &[ResidencyRecord]) -> ResidencyRecord {
        let band = records.first().map_or(0.0, |r| r.band);
        let mut durations = Vec::new();
        let mut labels = Vec::new();
        for r in records {
            durations.extend_from_slice(&r.durations);
            labels.extend_from_slice(&r.labels);
        }
        let diagnostic = durations
            .is_empty()
            .then(|| format!("no complete dwell in {} traces", records.len()));
        ResidencyRecord {
            durations,
            labels,
            band,
            diagnostic,
        }
    }
}

/// Streaming detector for one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisDetector {
    band: f64,
    state: Option<Well>,
    last_jump: Option<f64>,
    jumps: usize,
    durations: Vec<f64>,
    labels: Vec<Well>,
}

impl HysteresisDetector {
    pub fn new(band: f64) -> Self {
        Self {
            band,
            state: None,
            last_jump: None,
            jumps: 0,
            durations: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, x: f64) {
        let side = if x > self.band {
            Well::Right
        } else if x < -self.band {
            Well::Left
        } else {
            return;
        };
        match self.state {
            None => self.state = Some(side),
            Some(current) if current != side => {
                if let Some(t_prev) = self.last_jump {
                    self.durations.push(t - t_prev);
                    self.labels.push(current);
                }
                self.last_jump = Some(t);
                self.jumps += 1;
                self.state = Some(side);
            }
            Some(_) => {}
        }
    }

    pub fn jumps(&self) -> usize {
        self.jumps
    }

    pub fn finish(self) -> ResidencyRecord {
        let diagnostic = (self.jumps < 2).then(|| format!("only {} jump(s) detected", self.jumps));
        ResidencyRecord {
            durations: self.durations,
            labels: self.labels,
            band: self.band,
            diagnostic,
        }
    }
}

fn band_for(x_min: f64, band_fraction: f64) -> Result<f64> {
    if !(x_min > 0.0) {
        return Err(Error::invalid("x_min", format!("well position must be positive, got {x_min}")));
    }
    if !(band_fraction > 0.0 && band_fraction < 1.0) {
        return Err(Error::invalid("band_fraction", format!("must be in (0, 1), got {band_fraction}")));
    }
    Ok(band_fraction * x_min)
}

/// Dwell times of one sampled trace.
pub fn residency_times(times: &[f64], trace: &[f64], x_min: f64, band_fraction: f64) -> Result<ResidencyRecord> {
    if times.len() != trace.len() {
        return Err(Error::TimeBaseMismatch(format!("{} times for {} samples", times.len(), trace.len())));
    }
    let mut d = HysteresisDetector::new(band_for(x_min, band_fraction)?);
    for (&t, &x) in times.iter().zip(trace) {
        d.push(t, x);
    }
    Ok(d.finish())
}

/// Feeds every particle of every step to its own detector.
#[derive(Debug, Clone)]
pub struct ResidencyTracker {
    detectors: Vec<HysteresisDetector>,
    band: f64,
}

impl ResidencyTracker {
    pub fn new(particles: usize, x_min: f64, band_fraction: f64) -> Result<Self> {
        let band = band_for(x_min, band_fraction)?;
        Ok(Self {
            detectors: vec![HysteresisDetector::new(band); particles],
            band,
        })
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn per_trajectory(self) -> Vec<ResidencyRecord> {
        self.detectors.into_iter().map(HysteresisDetector::finish).collect()
    }

    /// Dwell times pooled over all trajectories.
    pub fn pooled(self) -> ResidencyRecord {
        ResidencyRecord::pooled(&self.per_trajectory())
    }
}

impl StepObserver for ResidencyTracker {
    fn observe(&mut self, ensemble: &Ensemble, _field: Option<FieldView<'_>>) {
        let t = ensemble.time;
        self.detectors
            .par_iter_mut()
            .zip(ensemble.positions.par_iter())
            .for_each(|(d, &x)| d.push(t, x));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square_wave(period: usize, cycles: usize, amplitude: f64) -> (Vec<f64>, Vec<f64>) {
        let n = period * 2 * cycles;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let trace = (0..n)
            .map(|i| if (i / period).is_multiple_of(2) { amplitude } else { -amplitude })
            .collect();
        (times, trace)
    }

    #[test]
    fn square_wave_dwells() {
        let xm = 5f64.sqrt();
        let (t, x) = square_wave(30, 5, xm);
        let r = residency_times(&t, &x, xm, 0.5).unwrap();
        assert_eq!(r.len(), 8);
        assert!(r.durations.iter().all(|d| (d - 3.0).abs() < 1e-9));
        assert!(r.labels.windows(2).all(|w| w[0] != w[1]));
        assert_eq!(r.labels[0], Well::Left);
        assert!(r.diagnostic.is_none());
    }

    #[test]
    fn too_few_jumps() {
        let r = residency_times(&[0.0, 1.0, 2.0], &[2.0, -2.0, -2.0], 2.0, 0.5).unwrap();
        assert!(r.is_empty());
        assert!(r.diagnostic.is_some());
        assert!(residency_times(&[0.0], &[1.0, 2.0], 2.0, 0.5).is_err());
        assert!(residency_times(&[0.0], &[1.0], 2.0, 1.5).is_err());
    }

    #[test]
    fn pooled_concatenates() {
        let (t, x) = square_wave(10, 3, 2.0);
        let a = residency_times(&t, &x, 2.0, 0.5).unwrap();
        let p = ResidencyRecord::pooled(&[a.clone(), a.clone()]);
        assert_eq!(p.len(), 2 * a.len());
        assert_eq!(p.mean_duration(), a.mean_duration());
    }

    proptest! {
        #[test]
        fn sub_band_noise_changes_nothing(noise in proptest::collection::vec(-0.99f64..0.99, 200)) {
            let xm = 2.0;
            let band = 0.5 * xm;
            let (t, x) = square_wave(20, 5, xm);
            let clean = residency_times(&t, &x, xm, 0.5).unwrap();
            // Perturbations smaller than the gap between the wells and the band.
            let noisy: Vec<f64> = x.iter().zip(noise.iter().cycle()).map(|(v, e)| v + e * (xm - band)).collect();
            let perturbed = residency_times(&t, &noisy, xm, 0.5).unwrap();
            prop_assert_eq!(clean.durations, perturbed.durations);
            prop_assert_eq!(clean.labels, perturbed.labels);
        }
    }
}
