//! Ensemble Euler-Maruyama integration of the McKean-Vlasov process
//!
//! ```text
//! dx = -V_ext'(x, t) dt + eps^2 d/dx( D2[sqrt n] / sqrt n ) dt + sqrt(2) dW
//! ```
//!
//! where `n` is the law of `x` itself, reconstructed every step from the
//! ensemble by kernel density estimation. The pipeline per step is
//! density -> drift -> particle update; the step boundary is a barrier.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bohm::{quantum_drift, BohmDrift, DriftOptions, DEFAULT_DRIFT_MAX};
use crate::density::{estimate_density, DensityField, GridPolicy, GridSpec, DEFAULT_KERNEL_WIDTH};
use crate::error::{Error, Result};
use crate::observables::moments::{ensemble_moments, Moments};
use crate::potentials::PotentialSpec;
use crate::quad;
use crate::rng::{CounterRng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub positions: Vec<f64>,
    pub time: f64,
    pub step_index: u64,
}

impl Ensemble {
    pub fn new(positions: Vec<f64>) -> Self {
        Self {
            positions,
            time: 0.0,
            step_index: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// Classical Boltzmann equilibrium of the potential at `t = 0-`.
    Equilibrium,
    /// Centred Gaussian with the given variance.
    Gaussian { variance: f64 },
    Positions(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Plain Brownian motion in the external potential.
    Classical,
    /// Self-consistent Bohm drift from the ensemble density.
    McKeanVlasov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub particles: usize,
    pub dt: f64,
    pub steps: u64,
    pub epsilon: f64,
    pub kernel_width: f64,
    pub grid: GridPolicy,
    pub potential: PotentialSpec,
    pub seed: u64,
    pub snapshot_stride: u64,
    /// Recompute the density every this many steps. Values above 1 are
    /// experimental.
    pub density_stride: u64,
    pub drift_max: Option<f64>,
    pub initial: InitialCondition,
    /// Keep full positions at every snapshot (otherwise only moments).
    pub retain_positions: bool,
    /// Worker threads; `None` uses every available core. Results never
    /// depend on this value.
    pub workers: Option<usize>,
}

impl SimulationConfig {
    pub fn new(potential: PotentialSpec) -> Self {
        Self {
            particles: 3000,
            dt: 0.1,
            steps: 300,
            epsilon: 0.0,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            grid: GridPolicy::default(),
            potential,
            seed: 0,
            snapshot_stride: 1,
            density_stride: 1,
            drift_max: Some(DEFAULT_DRIFT_MAX),
            initial: InitialCondition::Equilibrium,
            retain_positions: true,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if self.particles == 0 {
            return Err(Error::invalid("particles", "need at least one particle"));
        }
        if self.epsilon > 0.0 && self.particles < 2 {
            return Err(Error::invalid("particles", "a density-coupled run needs at least 2 particles"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon", format!("must be >= 0, got {}", self.epsilon)));
        }
        if !(self.kernel_width > 0.0) {
            return Err(Error::invalid("kernel_width", format!("must be positive, got {}", self.kernel_width)));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride", "must be >= 1"));
        }
        if self.density_stride == 0 {
            return Err(Error::invalid("density_stride", "must be >= 1"));
        }
        if let Some(m) = self.drift_max {
            if !(m > 0.0) {
                return Err(Error::invalid("drift_max", format!("must be positive, got {m}")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        match &self.initial {
            InitialCondition::Gaussian { variance } if !(*variance > 0.0) => {
                return Err(Error::invalid("initial_variance", format!("must be positive, got {variance}")));
            }
            InitialCondition::Positions(p) if p.len() != self.particles => {
                return Err(Error::invalid(
                    "initial",
                    format!("{} initial positions for {} particles", p.len(), self.particles),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounters {
    pub steps: u64,
    pub drift_clamps: u64,
    pub edge_extrapolations: u64,
    pub regrids: u64,
}

impl RunCounters {
    pub fn merge(&mut self, other: &RunCounters) {
        self.steps += other.steps;
        self.drift_clamps += other.drift_clamps;
        self.edge_extrapolations += other.edge_extrapolations;
        self.regrids += other.regrids;
    }
}

/// Snapshots of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryArchive {
    pub times: Vec<f64>,
    pub steps: Vec<u64>,
    /// Per-snapshot positions; empty when positions were not retained.
    pub positions: Vec<Vec<f64>>,
    pub summaries: Vec<Option<Moments>>,
    pub counters: RunCounters,
}

impl TrajectoryArchive {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn has_positions(&self) -> bool {
        !self.positions.is_empty()
    }

    /// Index of the snapshot closest to `t`, if within half a sampling gap.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let idx = self.times.partition_point(|&s| s < t);
        let candidates = [idx.checked_sub(1), Some(idx)];
        let best = candidates
            .into_iter()
            .flatten()
            .filter(|&i| i < self.times.len())
            .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))?;
        let gap = if self.times.len() > 1 {
            (self.times[1] - self.times[0]).abs()
        } else {
            f64::INFINITY
        };
        ((self.times[best] - t).abs() <= 0.5 * gap + 1e-9).then_some(best)
    }

    pub fn push(&mut self, time: f64, step: u64, positions: Option<Vec<f64>>, summary: Option<Moments>) {
        self.times.push(time);
        self.steps.push(step);
        if let Some(p) = positions {
            self.positions.push(p);
        }
        self.summaries.push(summary);
    }
}

/// Density and drift used to advance the ensemble at one step.
#[derive(Debug, Clone, Copy)]
pub struct FieldView<'a> {
    pub density: &'a DensityField,
    pub drift: &'a BohmDrift,
}

/// Receives the ensemble before each update (with the field used for that
/// update) and once more after the last step (without a field).
pub trait StepObserver: Send {
    fn observe(&mut self, ensemble: &Ensemble, field: Option<FieldView<'_>>);
}

impl<T: StepObserver + ?Sized> StepObserver for &mut T {
    fn observe(&mut self, ensemble: &Ensemble, field: Option<FieldView<'_>>) {
        (**self).observe(ensemble, field)
    }
}

impl<A: StepObserver, B: StepObserver> StepObserver for (A, B) {
    fn observe(&mut self, ensemble: &Ensemble, field: Option<FieldView<'_>>) {
        self.0.observe(ensemble, field);
        self.1.observe(ensemble, field);
    }
}

/// Records snapshots every `stride` steps plus the final state.
#[derive(Debug, Clone)]
pub struct ArchiveRecorder {
    stride: u64,
    retain_positions: bool,
    final_step: u64,
    archive: TrajectoryArchive,
}

impl ArchiveRecorder {
    pub fn new(stride: u64, retain_positions: bool, final_step: u64) -> Self {
        Self {
            stride: stride.max(1),
            retain_positions,
            final_step,
            archive: TrajectoryArchive::default(),
        }
    }

    pub fn finish(self, counters: RunCounters) -> TrajectoryArchive {
        let mut archive = self.archive;
        archive.counters = counters;
        archive
    }
}

impl StepObserver for ArchiveRecorder {
    fn observe(&mut self, ensemble: &Ensemble, _field: Option<FieldView<'_>>) {
        let k = ensemble.step_index;
        if !k.is_multiple_of(self.stride) && k != self.final_step {
            return;
        }
        if self.archive.steps.last() == Some(&k) {
            return;
        }
        let summary = ensemble_moments(&ensemble.positions).ok();
        let positions = self.retain_positions.then(|| ensemble.positions.clone());
        self.archive.push(ensemble.time, k, positions, summary);
    }
}

/// Everything a single Euler-Maruyama update needs.
#[derive(Debug, Clone)]
pub struct StepParams {
    pub potential: PotentialSpec,
    pub dt: f64,
    pub seed: u64,
    /// Thermal noise on or off; off is only useful for tests.
    pub noise: bool,
}

impl StepParams {
    pub fn from_config(config: &SimulationConfig) -> Self {
        Self {
            potential: config.potential.clone(),
            dt: config.dt,
            seed: config.seed,
            noise: true,
        }
    }
}

/// Advances every particle by one Euler-Maruyama step.
///
/// The noise for particle `i` at step `k` is a pure function of
/// `(seed, i, k)`. Positions outside the drift grid use the nearest edge
/// value and are counted in `counters.edge_extrapolations`.
pub fn step_ensemble(
    ensemble: &Ensemble,
    params: &StepParams,
    drift: Option<&BohmDrift>,
    counters: &mut RunCounters,
) -> Result<Ensemble> {
    let rng = CounterRng::new(params.seed);
    let dt = params.dt;
    let t = ensemble.time;
    let k = ensemble.step_index;
    let noise_amp = if params.noise { (2.0 * dt).sqrt() } else { 0.0 };
    let potential = &params.potential;

    let mut next = ensemble.positions.clone();
    let outside: usize = next
        .par_iter_mut()
        .enumerate()
        .map(|(i, x)| {
            let mut a = potential.force(*x, t);
            let mut off = 0;
            if let Some(d) = drift {
                let (q, outside) = d.at(*x);
                a += q;
                off = usize::from(outside);
            }
            let xi = if params.noise {
                rng.normal(Stream::Increment, i as u64, k)
            } else {
                0.0
            };
            *x += a * dt + noise_amp * xi;
            off
        })
        .sum();

    if let Some(bad) = next.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            particle: bad,
            step: k,
            time: t,
            snapshot: ensemble.positions.clone(),
        });
    }
    if outside > 0 {
        if counters.edge_extrapolations == 0 {
            warn!("step {k}: {outside} particles outside the drift grid, using edge values");
        }
        counters.edge_extrapolations += outside as u64;
    }
    counters.steps += 1;
    Ok(Ensemble {
        positions: next,
        time: (k + 1) as f64 * dt,
        step_index: k + 1,
    })
}

/// Runs `f` on a pool with `workers` threads, or on the global pool.
pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid("workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// I.i.d. samples from `exp(-V(x))` at `t = 0-`, by rejection against a
/// centred Gaussian envelope. Deterministic given `seed`.
pub fn sample_initial_equilibrium(spec: &PotentialSpec, particles: usize, seed: u64) -> Result<Ensemble> {
    spec.validate()?;
    let sampler = EquilibriumSampler::new(spec)?;
    let rng = CounterRng::new(seed);
    let positions = (0..particles)
        .into_par_iter()
        .map(|i| sampler.draw(&rng, i as u64))
        .collect();
    Ok(Ensemble::new(positions))
}

/// Gaussian envelope `N(0, sigma^2)` scaled so that it dominates
/// `exp(-V)`: `log_bound = sup_x [ -V(x) + x^2 / (2 sigma^2) ]`.
struct EquilibriumSampler {
    alpha: f64,
    beta: f64,
    sigma: f64,
    log_bound: f64,
}

impl EquilibriumSampler {
    fn new(spec: &PotentialSpec) -> Result<Self> {
        // A harmonic potential is the quartic with alpha = kappa/2, beta = 0.
        let (alpha, beta) = match spec {
            PotentialSpec::Quartic { alpha, beta } => (*alpha, *beta),
            PotentialSpec::Harmonic { protocol } => (0.5 * protocol.initial_kappa(), 0.0),
        };
        if beta == 0.0 {
            let sigma = (0.5 / alpha).sqrt();
            return Ok(Self {
                alpha,
                beta,
                sigma,
                log_bound: 0.0,
            });
        }
        let log_bound_for = |sigma: f64| {
            let c = 0.5 / (sigma * sigma) - alpha;
            if c > 0.0 {
                c * c / (4.0 * beta)
            } else {
                0.0
            }
        };
        // Pick the envelope width maximising the acceptance rate
        // Z / (exp(log_bound) sqrt(2 pi) sigma).
        let reach = {
            let scale = (alpha.abs() / beta).sqrt().max((1.0 / beta).powf(0.25));
            4.0 * scale + 4.0
        };
        let z = quad::simpson(|x| (-(alpha * x * x + beta * x.powi(4))).exp(), -reach, reach, 4000);
        let sigma = (1..=400)
            .map(|i| 0.01 * i as f64 * reach / 4.0)
            .max_by(|&a, &b| {
                let acc = |s: f64| z / (log_bound_for(s).exp() * (2.0 * std::f64::consts::PI).sqrt() * s);
                acc(a).total_cmp(&acc(b))
            })
            .unwrap();
        Ok(Self {
            alpha,
            beta,
            sigma,
            log_bound: log_bound_for(sigma),
        })
    }

    fn draw(&self, rng: &CounterRng, particle: u64) -> f64 {
        let mut stream = rng.stream(Stream::Initial, particle);
        loop {
            let x = self.sigma * stream.normal();
            if self.beta == 0.0 {
                return x;
            }
            let log_ratio = -(self.alpha * x * x + self.beta * x.powi(4)) + x * x / (2.0 * self.sigma * self.sigma)
                - self.log_bound;
            if stream.uniform().ln() <= log_ratio {
                return x;
            }
        }
    }
}

fn gaussian_ensemble(particles: usize, variance: f64, seed: u64) -> Ensemble {
    let rng = CounterRng::new(seed);
    let sd = variance.sqrt();
    let positions = (0..particles)
        .into_par_iter()
        .map(|i| sd * rng.normal(Stream::Initial, i as u64, 0))
        .collect();
    Ensemble::new(positions)
}

pub fn initial_ensemble(config: &SimulationConfig) -> Result<Ensemble> {
    match &config.initial {
        InitialCondition::Equilibrium => sample_initial_equilibrium(&config.potential, config.particles, config.seed),
        InitialCondition::Gaussian { variance } => Ok(gaussian_ensemble(config.particles, *variance, config.seed)),
        InitialCondition::Positions(p) => Ok(Ensemble::new(p.clone())),
    }
}

/// Runs the integrator and feeds every state to `observer`.
pub fn simulate(config: &SimulationConfig, coupling: Coupling, observer: &mut dyn StepObserver) -> Result<RunCounters> {
    config.validate()?;
    with_workers(config.workers, || simulate_inner(config, coupling, observer))?
}

fn simulate_inner(config: &SimulationConfig, coupling: Coupling, observer: &mut dyn StepObserver) -> Result<RunCounters> {
    let mut ensemble = initial_ensemble(config)?;
    let params = StepParams::from_config(config);
    let options = DriftOptions {
        drift_max: config.drift_max,
        ..DriftOptions::default()
    };
    let mut counters = RunCounters::default();
    let mut grid: Option<GridSpec> = None;
    let mut field: Option<(DensityField, BohmDrift)> = None;

    for k in 0..config.steps {
        if coupling == Coupling::McKeanVlasov && k % config.density_stride == 0 {
            let g = config
                .grid
                .grid_for(&ensemble.positions, config.kernel_width, grid.as_ref())?;
            if grid.as_ref() != Some(&g) {
                counters.regrids += 1;
                grid = Some(g);
            }
            let density = estimate_density(&ensemble.positions, &g, config.kernel_width)?;
            let drift = quantum_drift(&density, config.epsilon, &options)?;
            counters.drift_clamps += drift.clamped() as u64;
            field = Some((density, drift));
        }
        let view = field.as_ref().map(|(density, drift)| FieldView { density, drift });
        observer.observe(&ensemble, view);
        ensemble = step_ensemble(&ensemble, &params, field.as_ref().map(|f| &f.1), &mut counters)?;
    }
    observer.observe(&ensemble, None);
    if counters.drift_clamps > 0 {
        info!("drift clamp triggered {} times", counters.drift_clamps);
    }
    Ok(counters)
}

fn run_archived(config: &SimulationConfig, coupling: Coupling) -> Result<TrajectoryArchive> {
    let mut recorder = ArchiveRecorder::new(config.snapshot_stride, config.retain_positions, config.steps);
    let counters = simulate(config, coupling, &mut recorder)?;
    Ok(recorder.finish(counters))
}

/// Density-coupled run: estimate density, compute the Bohm drift, advance.
pub fn run_mckean_vlasov(config: &SimulationConfig) -> Result<TrajectoryArchive> {
    run_archived(config, Coupling::McKeanVlasov)
}

/// The same integrator with the Bohm drift switched off entirely.
pub fn run_classical(config: &SimulationConfig) -> Result<TrajectoryArchive> {
    run_archived(config, Coupling::Classical)
}

/// Time-averaged density, Bohm potential and drift on a fixed grid over
/// the window `[t_start, t_end]` (arithmetic mean over steps).
#[derive(Debug, Clone)]
pub struct MeanFieldAccumulator {
    grid: GridSpec,
    t_start: f64,
    t_end: f64,
    epsilon: f64,
    density: Vec<f64>,
    potential: Vec<f64>,
    drift: Vec<f64>,
    samples: usize,
}

impl MeanFieldAccumulator {
    pub fn new(grid: GridSpec, epsilon: f64, t_start: f64, t_end: f64) -> Self {
        let m = grid.points();
        Self {
            grid,
            t_start,
            t_end,
            epsilon,
            density: vec![0.0; m],
            potential: vec![0.0; m],
            drift: vec![0.0; m],
            samples: 0,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mean_density(&self) -> Vec<f64> {
        self.scaled(&self.density)
    }

    pub fn mean_potential(&self) -> Vec<f64> {
        self.scaled(&self.potential)
    }

    pub fn mean_drift(&self) -> Vec<f64> {
        self.scaled(&self.drift)
    }

    fn scaled(&self, v: &[f64]) -> Vec<f64> {
        let s = if self.samples > 0 { 1.0 / self.samples as f64 } else { 0.0 };
        v.iter().map(|x| x * s).collect()
    }
}

impl StepObserver for MeanFieldAccumulator {
    fn observe(&mut self, ensemble: &Ensemble, field: Option<FieldView<'_>>) {
        let Some(field) = field else { return };
        if ensemble.time < self.t_start - 1e-12 || ensemble.time > self.t_end + 1e-12 {
            return;
        }
        let potential = crate::bohm::bohm_potential_field(field.density, self.epsilon).unwrap_or_default();
        let src = field.density.grid();
        for j in 0..self.grid.points() {
            let x = self.grid.node(j);
            self.density[j] += field.density.value_at(x);
            self.drift[j] += field.drift.at(x).0;
            if let Some(v) = crate::density::interpolate(src, &potential, x) {
                self.potential[j] += v;
            }
        }
        self.samples += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::moments::ensemble_moments;
    use approx::assert_abs_diff_eq;

    fn harmonic_config(kappa: f64) -> SimulationConfig {
        let mut c = SimulationConfig::new(PotentialSpec::harmonic(kappa).unwrap());
        c.particles = 4000;
        c.dt = 0.01;
        c.steps = 200;
        c.snapshot_stride = 50;
        c
    }

    #[test]
    fn noiseless_forceless_step_is_identity() {
        let spec = PotentialSpec::quartic(0.6, 0.2).unwrap();
        let e = Ensemble::new(vec![0.0; 10]);
        let params = StepParams {
            potential: spec,
            dt: 0.1,
            seed: 1,
            noise: false,
        };
        let mut c = RunCounters::default();
        let next = step_ensemble(&e, &params, None, &mut c).unwrap();
        assert_eq!(next.positions, e.positions);
        assert_abs_diff_eq!(next.time, 0.1);
        assert_eq!(next.step_index, 1);
    }

    #[test]
    fn nan_aborts_with_snapshot() {
        let spec = PotentialSpec::quartic(0.6, 0.2).unwrap();
        let e = Ensemble::new(vec![0.0, f64::NAN]);
        let params = StepParams {
            potential: spec,
            dt: 0.1,
            seed: 1,
            noise: true,
        };
        let err = step_ensemble(&e, &params, None, &mut RunCounters::default()).unwrap_err();
        match err {
            Error::NonFinite { particle, snapshot, .. } => {
                assert_eq!(particle, 1);
                assert_eq!(snapshot.len(), 2);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let mut c = harmonic_config(1.0);
        c.dt = 0.0;
        assert!(run_classical(&c).is_err());
        let mut c = harmonic_config(1.0);
        c.epsilon = 1.0;
        c.particles = 1;
        assert!(run_mckean_vlasov(&c).is_err());
        let mut c = harmonic_config(1.0);
        c.epsilon = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn equilibrium_sampling_is_deterministic_and_harmonic_variance_is_one() {
        let spec = PotentialSpec::harmonic(1.0).unwrap();
        let a = sample_initial_equilibrium(&spec, 100_000, 3).unwrap();
        let b = sample_initial_equilibrium(&spec, 100_000, 3).unwrap();
        assert_eq!(a, b);
        let m = ensemble_moments(&a.positions).unwrap();
        assert_abs_diff_eq!(m.variance, 1.0, epsilon = 4.0 * (2.0f64 / 1e5).sqrt());
    }

    #[test]
    fn same_seed_same_archive_and_snapshot_layout() {
        let c = harmonic_config(1.0);
        let a = run_classical(&c).unwrap();
        let b = run_classical(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps, vec![0, 50, 100, 150, 200]);
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        for (p, s) in a.positions.iter().zip(&a.summaries) {
            assert_eq!(ensemble_moments(p).ok(), *s);
        }
        let mut other = c.clone();
        other.seed = 1;
        assert_ne!(run_classical(&other).unwrap().positions, a.positions);
    }

    #[test]
    fn zero_epsilon_mckean_vlasov_equals_classical() {
        let mut c = harmonic_config(1.0);
        c.particles = 500;
        c.steps = 40;
        c.snapshot_stride = 1;
        let q = run_mckean_vlasov(&c).unwrap();
        let cl = run_classical(&c).unwrap();
        assert_eq!(q.positions, cl.positions);
        assert_eq!(q.times, cl.times);
    }

    #[test]
    fn index_lookup() {
        let c = harmonic_config(1.0);
        let a = run_classical(&c).unwrap();
        assert_eq!(a.index_at(1.0), Some(2));
        assert_eq!(a.index_at(0.74), Some(1));
        assert_eq!(a.index_at(10.0), None);
    }

    #[test]
    fn mean_field_accumulator_averages_window() {
        let mut c = harmonic_config(1.0);
        c.epsilon = 1.0;
        c.particles = 2000;
        c.steps = 20;
        c.kernel_width = 0.8;
        let grid = GridSpec::symmetric(3.0, 61).unwrap();
        let mut acc = MeanFieldAccumulator::new(grid, 1.0, 0.05, 0.1);
        simulate(&c, Coupling::McKeanVlasov, &mut acc).unwrap();
        // Steps at t = 0.05 .. 0.10 inclusive.
        assert_eq!(acc.samples(), 6);
        let d = acc.mean_drift();
        // Outward drift on the right of the origin.
        assert!(d[40] > 0.0 && d[20] < 0.0);
    }
}
