//! Harmonic confinement: when the density stays Gaussian the whole
//! McKean-Vlasov process reduces to a scalar variance ODE
//!
//! ```text
//! dS/dt = -2 kappa(t) S + eps^2 / S + 2
//! ```
//!
//! and to an Ornstein-Uhlenbeck process with the modified stiffness
//! `kappa_bar = kappa - eps^2 / (2 S^2)`.

use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::moments::ensemble_moments;
use crate::potentials::{StiffnessProtocol, StiffnessSchedule};
use crate::rng::{CounterRng, Stream};
use crate::sde::{with_workers, ArchiveRecorder, Ensemble, RunCounters, StepObserver, TrajectoryArchive};

/// RK4 substeps per output step.
pub const ODE_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceSource {
    Analytic,
    Ensemble,
    ExperimentImport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    source: VarianceSource,
}

impl VarianceSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, source: VarianceSource) -> Result<Self> {
        check_time_base(&times, values.len())?;
        if let Some(bad) = values.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(
                "variance",
                format!("must be positive, got {} at t = {}", values[bad], times[bad]),
            ));
        }
        Ok(Self { times, values, source })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> VarianceSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.times.last()?, *self.values.last()?))
    }

    /// Linear interpolation, `None` outside the covered interval.
    pub fn at(&self, t: f64) -> Option<f64> {
        interpolate_series(&self.times, &self.values, t)
    }

    /// Reads a `time,value` CSV (e.g. measured variances) as an imported series.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for record in reader.deserialize() {
            let (t, s): (f64, f64) = record?;
            times.push(t);
            values.push(s);
        }
        Self::new(times, values, VarianceSource::ExperimentImport)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_time_value_csv(path, &self.times, &self.values)
    }
}

/// `kappa_bar(t)` sampled on a time base. As a schedule it is
/// piecewise constant: the value of the latest sample at or before `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedStiffnessSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ModifiedStiffnessSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_time_base(&times, values.len())?;
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of samples where the net stiffness is anti-trapping.
    pub fn negative_count(&self) -> usize {
        self.values.iter().filter(|k| **k < 0.0).count()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_time_value_csv(path, &self.times, &self.values)
    }
}

impl StiffnessSchedule for ModifiedStiffnessSeries {
    fn stiffness(&self, t: f64) -> f64 {
        let tol = 1e-9 * (1.0 + t.abs());
        let idx = self.times.partition_point(|&s| s <= t + tol);
        self.values[idx.saturating_sub(1)]
    }
}

fn check_time_base(times: &[f64], values: usize) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InsufficientData("series needs at least one sample".into()));
    }
    if times.len() != values {
        return Err(Error::TimeBaseMismatch(format!("{} times for {} values", times.len(), values)));
    }
    if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "times",
            format!("must be strictly increasing ({} then {})", w[0], w[1]),
        ));
    }
    Ok(())
}

fn interpolate_series(times: &[f64], values: &[f64], t: f64) -> Option<f64> {
    let (first, last) = (*times.first()?, *times.last()?);
    if t < first || t > last {
        return None;
    }
    let idx = times.partition_point(|&s| s <= t);
    if idx >= times.len() {
        return values.last().copied();
    }
    let j = idx - 1;
    let w = (t - times[j]) / (times[j + 1] - times[j]);
    Some(values[j] * (1.0 - w) + values[j + 1] * w)
}

fn write_time_value_csv(path: &Path, times: &[f64], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "value"])?;
    for (t, v) in times.iter().zip(values) {
        w.write_record([t.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Positive root of `2 kappa S^2 - 2 S - eps^2 = 0`.
pub fn stationary_variance(kappa: f64, epsilon: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid("kappa", format!("must be positive, got {kappa}")));
    }
    Ok((1.0 + (1.0 + 2.0 * epsilon * epsilon * kappa).sqrt()) / (2.0 * kappa))
}

fn variance_rate(s: f64, kappa: f64, e2: f64) -> f64 {
    -2.0 * kappa * s + e2 / s + 2.0
}

// One RK4 step; `None` if any stage leaves S > 0 or S changes by more than
// half its value (the eps^2/S term is stiff near S = 0).
fn rk4(s: f64, kappa: f64, e2: f64, h: f64) -> Option<f64> {
    let k1 = variance_rate(s, kappa, e2);
    let s2 = s + 0.5 * h * k1;
    if !(s2 > 0.0) {
        return None;
    }
    let k2 = variance_rate(s2, kappa, e2);
    let s3 = s + 0.5 * h * k2;
    if !(s3 > 0.0) {
        return None;
    }
    let k3 = variance_rate(s3, kappa, e2);
    let s4 = s + h * k3;
    if !(s4 > 0.0) {
        return None;
    }
    let k4 = variance_rate(s4, kappa, e2);
    let next = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    (next > 0.0 && next.is_finite() && (next - s).abs() <= 0.5 * s).then_some(next)
}

// Advances by `h`, halving the step wherever a full step is rejected.
fn advance(s: f64, kappa: f64, e2: f64, h: f64, depth: u32) -> Result<f64> {
    if let Some(next) = rk4(s, kappa, e2, h) {
        return Ok(next);
    }
    if depth >= 40 {
        return Err(Error::invalid("dt", format!("variance ODE step could not keep S > 0 near S = {s}")));
    }
    let mid = advance(s, kappa, e2, 0.5 * h, depth + 1)?;
    advance(mid, kappa, e2, 0.5 * h, depth + 1)
}

/// Integrates the variance ODE on `[0, horizon]` and samples it every `dt`.
///
/// Each output interval is split exactly at protocol breakpoints and
/// covered with `ODE_SUBSTEPS` RK4 steps per `dt`.
pub fn integrate_variance_ode(
    protocol: &StiffnessProtocol,
    epsilon: f64,
    s0: f64,
    dt: f64,
    horizon: f64,
) -> Result<VarianceSeries> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("horizon", format!("must be positive, got {horizon}")));
    }
    if !(s0 > 0.0) {
        return Err(Error::invalid("s0", format!("must be positive, got {s0}")));
    }
    let e2 = epsilon * epsilon;
    let steps = (horizon / dt - 1e-9).ceil() as u64;
    let h_target = dt / ODE_SUBSTEPS as f64;

    let mut times = Vec::with_capacity(steps as usize + 1);
    let mut values = Vec::with_capacity(steps as usize + 1);
    let mut s = s0;
    times.push(0.0);
    values.push(s);
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        let mut cuts = vec![t0];
        cuts.extend(protocol.switch_times_in(t0, t1));
        cuts.push(t1);
        for piece in cuts.windows(2) {
            let len = piece[1] - piece[0];
            let kappa = protocol.kappa_at(0.5 * (piece[0] + piece[1]));
            let n = (len / h_target - 1e-9).ceil().max(1.0) as usize;
            let h = len / n as f64;
            for _ in 0..n {
                s = advance(s, kappa, e2, h, 0)?;
            }
        }
        times.push(t1);
        values.push(s);
    }
    VarianceSeries::new(times, values, VarianceSource::Analytic)
}

/// `kappa_bar(t) = kappa(t) - eps^2 / (2 S(t)^2)` on the time base of `s`.
pub fn modified_stiffness(
    protocol: &StiffnessProtocol,
    s: &VarianceSeries,
    epsilon: f64,
) -> Result<ModifiedStiffnessSeries> {
    let e2 = epsilon * epsilon;
    let values: Vec<f64> = s
        .times()
        .iter()
        .zip(s.values())
        .map(|(&t, &v)| protocol.kappa_at(t) - e2 / (2.0 * v * v))
        .collect();
    let series = ModifiedStiffnessSeries::new(s.times().to_vec(), values)?;
    let negative = series.negative_count();
    if negative > 0 {
        info!("modified stiffness is negative at {negative} samples");
    }
    Ok(series)
}

/// Classical step between the same initial and final equilibria.
pub fn classical_equivalent_step(kappa_bar_initial: f64, kappa_bar_final: f64, t_step: f64) -> Result<StiffnessProtocol> {
    if !(kappa_bar_final > 0.0) {
        return Err(Error::invalid("kappa_bar_final", format!("must be positive, got {kappa_bar_final}")));
    }
    StiffnessProtocol::step(kappa_bar_initial, kappa_bar_final, t_step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuConfig {
    pub particles: usize,
    pub dt: f64,
    pub steps: u64,
    pub seed: u64,
    /// Variance of the centred Gaussian initial ensemble.
    pub initial_variance: f64,
    pub snapshot_stride: u64,
    pub retain_positions: bool,
    pub workers: Option<usize>,
}

impl OuConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid("particles", "need at least one particle"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.initial_variance > 0.0) {
            return Err(Error::invalid(
                "initial_variance",
                format!("must be positive, got {}", self.initial_variance),
            ));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride", "must be >= 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        Ok(())
    }
}

/// `N` independent trajectories of `dx = -kappa(t) x dt + sqrt(2) dW`,
/// under the same per-particle noise streams as the full integrator.
pub fn run_ou_process(schedule: &dyn StiffnessSchedule, config: &OuConfig) -> Result<TrajectoryArchive> {
    config.validate()?;
    let mut recorder = ArchiveRecorder::new(config.snapshot_stride, config.retain_positions, config.steps);
    let counters = with_workers(config.workers, || {
        simulate_linear(config, &mut recorder, |e| (schedule.stiffness(e.time), 0.0))
    })??;
    Ok(recorder.finish(counters))
}

/// Gaussian-closure McKean-Vlasov ensemble: at every step the ensemble
/// variance `S` is measured and fed back through the modified stiffness
/// `kappa(t) - eps^2 / (2 S^2)`, acting about the ensemble mean.
pub fn run_variance_feedback(protocol: &StiffnessProtocol, epsilon: f64, config: &OuConfig) -> Result<TrajectoryArchive> {
    config.validate()?;
    if config.particles < 4 {
        return Err(Error::invalid("particles", "variance feedback needs at least 4 particles"));
    }
    let e2 = epsilon * epsilon;
    let mut recorder = ArchiveRecorder::new(config.snapshot_stride, config.retain_positions, config.steps);
    let counters = with_workers(config.workers, || {
        simulate_linear(config, &mut recorder, |e| {
            let m = ensemble_moments(&e.positions).expect("particle count checked above");
            (protocol.kappa_at(e.time) - e2 / (2.0 * m.variance * m.variance), m.mean)
        })
    })??;
    Ok(recorder.finish(counters))
}

/// Linear-drift ensemble `dx = -k (x - c) dt + sqrt(2) dW` where
/// `(k, c) = law(ensemble)` is re-evaluated before every step.
pub fn simulate_linear(
    config: &OuConfig,
    observer: &mut dyn StepObserver,
    mut law: impl FnMut(&Ensemble) -> (f64, f64),
) -> Result<RunCounters> {
    let rng = CounterRng::new(config.seed);
    let sd = config.initial_variance.sqrt();
    let positions = (0..config.particles)
        .into_par_iter()
        .map(|i| sd * rng.normal(Stream::Initial, i as u64, 0))
        .collect();
    let mut ensemble = Ensemble::new(positions);
    let noise = (2.0 * config.dt).sqrt();
    let dt = config.dt;
    let mut counters = RunCounters::default();
    for k in 0..config.steps {
        observer.observe(&ensemble, None);
        let (kappa, center) = law(&ensemble);
        ensemble
            .positions
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, x)| *x += -kappa * (*x - center) * dt + noise * rng.normal(Stream::Increment, i as u64, k));
        if let Some(bad) = ensemble.positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                particle: bad,
                step: k,
                time: ensemble.time,
                snapshot: ensemble.positions,
            });
        }
        ensemble.step_index = k + 1;
        ensemble.time = (k + 1) as f64 * dt;
        counters.steps += 1;
    }
    observer.observe(&ensemble, None);
    Ok(counters)
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(name, format!("must be positive, got {v}")));
    }
    Ok(())
}

/// `eps = sqrt(hbar^2 kappa_i / (2 m (k_B T)^2))`.
pub fn epsilon_from_physical(hbar: f64, kappa_i: f64, mass: f64, kbt: f64) -> Result<f64> {
    check_positive("hbar", hbar)?;
    check_positive("kappa_i", kappa_i)?;
    check_positive("mass", mass)?;
    check_positive("kbt", kbt)?;
    Ok((hbar * hbar * kappa_i / (2.0 * mass * kbt * kbt)).sqrt())
}

/// The Planck constant a classical experiment emulates for a given `eps`:
/// `hbar^2 = 2 m (k_B T eps)^2 / kappa_i`.
pub fn arbitrary_planck(epsilon: f64, kappa_i: f64, mass: f64, kbt: f64) -> Result<f64> {
    check_positive("epsilon", epsilon)?;
    check_positive("kappa_i", kappa_i)?;
    check_positive("mass", mass)?;
    check_positive("kbt", kbt)?;
    Ok((2.0 * mass * (kbt * epsilon).powi(2) / kappa_i).sqrt())
}
