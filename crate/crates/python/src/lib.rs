//! Python bindings. Arrays cross the boundary as plain lists of floats.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use bohm_analog::config::{ExperimentKind, RunConfig};
use bohm_analog::density::{estimate_density as kde, GridSpec};
use bohm_analog::gaussian;
use bohm_analog::observables as obs;
use bohm_analog::sde::{self, InitialCondition, SimulationConfig};
use bohm_analog::{bohm, Error, PotentialSpec, StiffnessProtocol};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for bohm_analog::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// External potential `alpha x^2 + beta x^4` or `kappa x^2 / 2`.
#[pyclass(name = "Potential", module = "bohm_analog_py", from_py_object)]
#[derive(Clone)]
struct PyPotential(PotentialSpec);

#[pymethods]
impl PyPotential {
    #[staticmethod]
    fn quartic(alpha: f64, beta: f64) -> PyResult<Self> {
        PotentialSpec::quartic(alpha, beta).py().map(Self)
    }

    #[staticmethod]
    fn harmonic(kappa: f64) -> PyResult<Self> {
        PotentialSpec::harmonic(kappa).py().map(Self)
    }

    /// Harmonic trap whose stiffness jumps from `kappa_initial` to
    /// `kappa_final` at `step_time`.
    #[staticmethod]
    fn harmonic_step(kappa_initial: f64, kappa_final: f64, step_time: f64) -> PyResult<Self> {
        let protocol = StiffnessProtocol::step(kappa_initial, kappa_final, step_time).py()?;
        Ok(Self(PotentialSpec::Harmonic { protocol }))
    }

    #[pyo3(signature = (x, t = 0.0))]
    fn potential(&self, x: f64, t: f64) -> f64 {
        self.0.potential(x, t)
    }

    #[pyo3(signature = (x, t = 0.0))]
    fn force(&self, x: f64, t: f64) -> f64 {
        self.0.force(x, t)
    }

    fn well_minimum(&self) -> Option<f64> {
        self.0.well_minimum()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Snapshots of an ensemble run.
#[pyclass(name = "Archive", module = "bohm_analog_py")]
struct PyArchive(sde::TrajectoryArchive);

#[pymethods]
impl PyArchive {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    /// Positions per snapshot; empty when positions were not retained.
    #[getter]
    fn positions(&self) -> Vec<Vec<f64>> {
        self.0.positions.clone()
    }

    /// `(mean, variance, skewness, excess kurtosis)` per snapshot.
    #[getter]
    fn moments(&self) -> Vec<Option<(f64, f64, f64, f64)>> {
        self.0
            .summaries
            .iter()
            .map(|m| m.map(|m| (m.mean, m.variance, m.skewness, m.excess_kurtosis)))
            .collect()
    }

    #[getter]
    fn variances(&self) -> Vec<f64> {
        self.0.summaries.iter().map(|m| m.map_or(f64::NAN, |m| m.variance)).collect()
    }

    #[getter]
    fn drift_clamps(&self) -> u64 {
        self.0.counters.drift_clamps
    }

    #[getter]
    fn regrids(&self) -> u64 {
        self.0.counters.regrids
    }

    /// Normalized autocorrelation from origin `t0`: `(values, std_errors)`.
    fn autocorrelation(&self, t0: f64, lags: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let a = obs::autocorrelation(&self.0, t0, &lags).py()?;
        Ok((a.values, a.std_errors))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Configuration of a Brownian ensemble run.
#[pyclass(name = "Simulation", module = "bohm_analog_py")]
struct PySimulation(SimulationConfig);

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (
        potential, *, particles = 3000, dt = 0.1, steps = 300, epsilon = 0.0, kernel_width = 0.8,
        seed = 0, snapshot_stride = 1, initial_variance = None, retain_positions = true, workers = None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        potential: PyPotential,
        particles: usize,
        dt: f64,
        steps: u64,
        epsilon: f64,
        kernel_width: f64,
        seed: u64,
        snapshot_stride: u64,
        initial_variance: Option<f64>,
        retain_positions: bool,
        workers: Option<usize>,
    ) -> PyResult<Self> {
        let mut cfg = SimulationConfig::new(potential.0);
        cfg.particles = particles;
        cfg.dt = dt;
        cfg.steps = steps;
        cfg.epsilon = epsilon;
        cfg.kernel_width = kernel_width;
        cfg.seed = seed;
        cfg.snapshot_stride = snapshot_stride;
        cfg.retain_positions = retain_positions;
        cfg.workers = workers;
        if let Some(variance) = initial_variance {
            cfg.initial = InitialCondition::Gaussian { variance };
        }
        cfg.validate().py()?;
        Ok(Self(cfg))
    }

    /// Runs the density-coupled ensemble (or the classical one if
    /// `coupled` is false). Releases the interpreter lock while running.
    #[pyo3(signature = (coupled = true))]
    fn run(&self, py: Python<'_>, coupled: bool) -> PyResult<PyArchive> {
        let cfg = self.0.clone();
        let archive = py
            .detach(move || {
                if coupled {
                    sde::run_mckean_vlasov(&cfg)
                } else {
                    sde::run_classical(&cfg)
                }
            })
            .py()?;
        Ok(PyArchive(archive))
    }
}

/// Kernel density estimate on `points` nodes of `[x_min, x_max]`:
/// returns `(nodes, density)`.
#[pyfunction]
fn estimate_density(
    positions: Vec<f64>,
    x_min: f64,
    x_max: f64,
    points: usize,
    kernel_width: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let grid = GridSpec::new(x_min, x_max, points).py()?;
    let field = kde(&positions, &grid, kernel_width).py()?;
    Ok((grid.nodes(), field.values().to_vec()))
}

/// Bohm potential and quantum drift on the grid of `estimate_density`:
/// returns `(nodes, density, V_Bohm, drift)`.
#[pyfunction]
fn bohm_fields(
    positions: Vec<f64>,
    x_min: f64,
    x_max: f64,
    points: usize,
    kernel_width: f64,
    epsilon: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let grid = GridSpec::new(x_min, x_max, points).py()?;
    let field = kde(&positions, &grid, kernel_width).py()?;
    let v = bohm::bohm_potential_field(&field, epsilon).py()?;
    let drift = bohm::quantum_drift(&field, epsilon, &bohm::DriftOptions::default()).py()?;
    Ok((grid.nodes(), field.values().to_vec(), v, drift.values().to_vec()))
}

#[pyfunction]
fn gaussian_quantum_drift(variance: f64, epsilon: f64, x: f64) -> PyResult<f64> {
    bohm::gaussian_quantum_drift(variance, epsilon, x).py()
}

#[pyfunction]
fn stationary_variance(kappa: f64, epsilon: f64) -> PyResult<f64> {
    gaussian::stationary_variance(kappa, epsilon).py()
}

/// Variance ODE for a stiffness step: returns `(times, S, kappa_bar)`.
#[pyfunction]
#[pyo3(signature = (kappa_initial, kappa_final, step_time, epsilon, dt, horizon, s0 = None))]
fn variance_ode(
    kappa_initial: f64,
    kappa_final: f64,
    step_time: f64,
    epsilon: f64,
    dt: f64,
    horizon: f64,
    s0: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let protocol = StiffnessProtocol::step(kappa_initial, kappa_final, step_time).py()?;
    let s0 = match s0 {
        Some(s) => s,
        None => gaussian::stationary_variance(kappa_initial, epsilon).py()?,
    };
    let s = gaussian::integrate_variance_ode(&protocol, epsilon, s0, dt, horizon).py()?;
    let kb = gaussian::modified_stiffness(&protocol, &s, epsilon).py()?;
    Ok((s.times().to_vec(), s.values().to_vec(), kb.values().to_vec()))
}

/// Ensemble whose stiffness is the modified stiffness built from its own
/// measured variance after each step; returns the archive.
#[pyfunction]
#[pyo3(signature = (kappa_initial, kappa_final, step_time, epsilon, *, particles = 20000, dt = 0.01, steps = 1200, seed = 0, snapshot_stride = 10))]
#[allow(clippy::too_many_arguments)]
fn variance_feedback(
    py: Python<'_>,
    kappa_initial: f64,
    kappa_final: f64,
    step_time: f64,
    epsilon: f64,
    particles: usize,
    dt: f64,
    steps: u64,
    seed: u64,
    snapshot_stride: u64,
) -> PyResult<PyArchive> {
    let protocol = StiffnessProtocol::step(kappa_initial, kappa_final, step_time).py()?;
    let cfg = gaussian::OuConfig {
        particles,
        dt,
        steps,
        seed,
        initial_variance: gaussian::stationary_variance(kappa_initial, epsilon).py()?,
        snapshot_stride,
        retain_positions: false,
        workers: None,
    };
    let archive = py.detach(|| gaussian::run_variance_feedback(&protocol, epsilon, &cfg)).py()?;
    Ok(PyArchive(archive))
}

/// `(mean, variance, skewness, excess kurtosis)`.
#[pyfunction]
fn ensemble_moments(x: Vec<f64>) -> PyResult<(f64, f64, f64, f64)> {
    let m = obs::ensemble_moments(&x).py()?;
    Ok((m.mean, m.variance, m.skewness, m.excess_kurtosis))
}

#[pyfunction]
fn variance_confidence_interval(sample_variance: f64, n: usize, level: f64) -> PyResult<(f64, f64)> {
    obs::variance_confidence_interval(sample_variance, n, level).py()
}

/// One-sided PSD: returns `(frequencies, psd)`.
#[pyfunction]
fn compute_psd(trace: Vec<f64>, sample_rate: f64, segment_len: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = obs::compute_psd(&trace, sample_rate, segment_len).py()?;
    Ok((s.frequencies, s.psd))
}

/// Lorentzian fit of a trace's PSD: returns `(f_c, D, kappa)`.
#[pyfunction]
#[pyo3(signature = (trace, sample_rate, segment_len, f_max = None))]
fn fit_lorentzian(trace: Vec<f64>, sample_rate: f64, segment_len: usize, f_max: Option<f64>) -> PyResult<(f64, f64, f64)> {
    let s = obs::compute_psd(&trace, sample_rate, segment_len).py()?;
    let fit = obs::fit_lorentzian(&s, f_max).py()?;
    Ok((fit.fc, fit.d, fit.kappa))
}

/// Variance relaxation fit after a step: returns `(kappa, s0, s_inf)`.
#[pyfunction]
fn step_relaxation_fit(times: Vec<f64>, values: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let fit = obs::step_relaxation_fit(&times, &values).py()?;
    Ok((fit.kappa, fit.s0, fit.s_inf))
}

/// Dwell times of one trace between wells at `+-x_min`: returns
/// `(durations, labels)` with labels `+1` / `-1`.
#[pyfunction]
#[pyo3(signature = (times, trace, x_min, band_fraction = obs::residency::DEFAULT_BAND_FRACTION))]
fn residency_times(times: Vec<f64>, trace: Vec<f64>, x_min: f64, band_fraction: f64) -> PyResult<(Vec<f64>, Vec<i8>)> {
    let r = obs::residency_times(&times, &trace, x_min, band_fraction).py()?;
    Ok((r.durations, r.labels.iter().map(|w| w.sign()).collect()))
}

/// Exponential fit with KS test: returns `(rate, ks_statistic, p_value)`.
#[pyfunction]
fn fit_exponential(durations: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = obs::fit_exponential(&durations).py()?;
    Ok((f.lambda, f.ks_statistic, f.ks_p_value))
}

/// Runs the experiment in a config file; returns the output directory.
#[pyfunction]
#[pyo3(signature = (config_path, out_root, overwrite = false))]
fn run_experiment(py: Python<'_>, config_path: PathBuf, out_root: PathBuf, overwrite: bool) -> PyResult<String> {
    let cfg = RunConfig::from_path(&config_path).py()?;
    let dir = py
        .detach(|| bohm_analog::experiment::run_experiment(&cfg, &out_root, overwrite))
        .py()?;
    Ok(dir.to_string_lossy().into_owned())
}

/// Documented config text of a preset.
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    let kind: ExperimentKind = name.parse().map_err(PyValueError::new_err)?;
    Ok(RunConfig::preset(kind).documented_text())
}

#[pymodule]
fn bohm_analog_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPotential>()?;
    m.add_class::<PySimulation>()?;
    m.add_class::<PyArchive>()?;
    m.add_function(wrap_pyfunction!(estimate_density, m)?)?;
    m.add_function(wrap_pyfunction!(bohm_fields, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_quantum_drift, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_variance, m)?)?;
    m.add_function(wrap_pyfunction!(variance_ode, m)?)?;
    m.add_function(wrap_pyfunction!(variance_feedback, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_moments, m)?)?;
    m.add_function(wrap_pyfunction!(variance_confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(compute_psd, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lorentzian, m)?)?;
    m.add_function(wrap_pyfunction!(step_relaxation_fit, m)?)?;
    m.add_function(wrap_pyfunction!(residency_times, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
