//! Run configuration: a flat `key = value` text file with `#` comments.
//!
//! An `experiment` line selects a preset whose values act as defaults;
//! every other key overrides them regardless of where it appears.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bohm::DEFAULT_DRIFT_MAX;
use crate::density::{GridPolicy, DEFAULT_KERNEL_WIDTH};
use crate::error::{Error, Result};
use crate::potentials::{PotentialSpec, StiffnessProtocol};
use crate::sde::{InitialCondition, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SingleWell,
    DoubleWell,
    HarmonicStep,
    HarmonicSweep,
    Custom,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::SingleWell,
        ExperimentKind::DoubleWell,
        ExperimentKind::HarmonicStep,
        ExperimentKind::HarmonicSweep,
        ExperimentKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SingleWell => "single-well",
            ExperimentKind::DoubleWell => "double-well",
            ExperimentKind::HarmonicStep => "harmonic-step",
            ExperimentKind::HarmonicSweep => "harmonic-sweep",
            ExperimentKind::Custom => "custom",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::SingleWell => "quartic single well: stationary distributions, autocorrelations, mean Bohm force",
            ExperimentKind::DoubleWell => "quartic double well: residency times and exponential fits",
            ExperimentKind::HarmonicStep => "harmonic stiffness step: variance ODE, modified stiffness, OU ensembles",
            ExperimentKind::HarmonicSweep => "harmonic stiffness step repeated over a list of epsilon values",
            ExperimentKind::Custom => "user-defined potential, quantum and classical runs",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Quartic,
    Harmonic,
}

impl FromStr for PotentialKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quartic" => Ok(PotentialKind::Quartic),
            "harmonic" => Ok(PotentialKind::Harmonic),
            _ => Err(format!("unknown potential `{s}` (quartic | harmonic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub name: String,
    pub potential: PotentialKind,
    pub alpha: f64,
    pub beta: f64,
    pub kappa_initial: f64,
    pub kappa_final: f64,
    pub step_time: f64,
    pub epsilon: f64,
    pub epsilons: Vec<f64>,
    pub particles: usize,
    pub steps: u64,
    pub dt: f64,
    pub seed: u64,
    pub kernel_width: f64,
    pub grid_points: usize,
    pub grid_margin: f64,
    pub regrid_fraction: f64,
    pub snapshot_stride: u64,
    pub density_stride: u64,
    pub drift_max: f64,
    pub workers: usize,
    pub trace_particles: usize,
    pub window_start: f64,
    pub band_fraction: f64,
    pub histogram_bins: usize,
    pub confidence_level: f64,
    pub density_snapshot_stride: u64,
}

/// Key, description. Order is the echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("experiment", "single-well | double-well | harmonic-step | harmonic-sweep | custom"),
    ("name", "output directory name (default: the experiment name)"),
    ("potential", "quartic | harmonic (custom experiment only)"),
    ("alpha", "quadratic coefficient of alpha x^2 + beta x^4; < 0 gives a double well"),
    ("beta", "quartic coefficient, > 0"),
    ("kappa_initial", "harmonic stiffness before the step"),
    ("kappa_final", "harmonic stiffness after the step"),
    ("step_time", "time of the stiffness step"),
    ("epsilon", "quantum strength (0 = classical)"),
    ("epsilons", "comma-separated epsilon values for harmonic-sweep"),
    ("particles", "ensemble size N"),
    ("steps", "number of time steps"),
    ("dt", "time step"),
    ("seed", "64-bit random seed"),
    ("kernel_width", "Gaussian kernel width h of the density estimate"),
    ("grid_points", "density grid points M"),
    ("grid_margin", "grid half-width beyond the outermost particle, in units of h"),
    ("regrid_fraction", "regrid when a particle leaves this inner fraction of the grid"),
    ("snapshot_stride", "record a snapshot every this many steps"),
    ("density_stride", "recompute the density every this many steps (experimental above 1)"),
    ("drift_max", "clamp |quantum drift| to this value (0 disables)"),
    ("workers", "worker threads (0 = all cores); never changes results"),
    ("trace_particles", "particles written to snapshots.csv (0 = all)"),
    ("window_start", "start of the stationary window for averages and autocorrelations"),
    ("band_fraction", "hysteresis band as a fraction of the well position"),
    ("histogram_bins", "bins of the stationary histograms"),
    ("confidence_level", "level of the chi-square variance intervals"),
    ("density_snapshot_stride", "write density/drift fields every this many steps (0 = none)"),
];

impl RunConfig {
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = RunConfig {
            experiment: kind,
            name: kind.name().to_string(),
            potential: PotentialKind::Quartic,
            alpha: 0.6,
            beta: 0.2,
            kappa_initial: 2.0,
            kappa_final: 0.5,
            step_time: 1.0,
            epsilon: 4.0,
            epsilons: vec![0.0, 1.0558, 1.4089, 1.801],
            particles: 3000,
            steps: 300,
            dt: 0.1,
            seed: 1,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            grid_points: 512,
            grid_margin: 6.0,
            regrid_fraction: 0.9,
            snapshot_stride: 1,
            density_stride: 1,
            drift_max: DEFAULT_DRIFT_MAX,
            workers: 0,
            trace_particles: 0,
            window_start: 10.0,
            band_fraction: 0.5,
            histogram_bins: 60,
            confidence_level: 0.997,
            density_snapshot_stride: 100,
        };
        match kind {
            ExperimentKind::SingleWell | ExperimentKind::Custom => base,
            ExperimentKind::DoubleWell => RunConfig {
                alpha: -1.0,
                beta: 0.1,
                epsilon: 2.0,
                steps: 2000,
                trace_particles: 100,
                window_start: 20.0,
                density_snapshot_stride: 500,
                ..base
            },
            ExperimentKind::HarmonicStep | ExperimentKind::HarmonicSweep => RunConfig {
                potential: PotentialKind::Harmonic,
                epsilon: 1.8,
                particles: 20_000,
                steps: 1200,
                dt: 0.01,
                snapshot_stride: 10,
                trace_particles: 100,
                window_start: 0.0,
                density_snapshot_stride: 0,
                ..base
            },
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses config text; `path` only labels error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Config {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut entries: Vec<(usize, &str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(line_no, format!("expected `key = value`, got `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(err(line_no, format!("unknown key `{key}`")));
            }
            if let Some((prev, _, _)) = entries.iter().find(|(_, k, _)| *k == key) {
                return Err(err(line_no, format!("duplicate key `{key}` (first set on line {prev})")));
            }
            entries.push((line_no, key, value));
        }

        let kind = match entries.iter().find(|(_, k, _)| *k == "experiment") {
            Some(&(line, _, v)) => v.parse().map_err(|m| err(line, m))?,
            None => ExperimentKind::SingleWell,
        };
        let mut cfg = RunConfig::preset(kind);
        for &(line, key, value) in &entries {
            cfg.set(key, value).map_err(|m| err(line, m))?;
        }
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                let line = entries.iter().find(|(_, k, _)| *k == name).map_or(0, |e| e.0);
                err(line, format!("{name}: {reason}"))
            }
            other => other,
        })?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("`{key}` expects a {}, got `{v}`", std::any::type_name::<T>()))
        }
        match key {
            "experiment" => self.experiment = value.parse()?,
            "name" => {
                if value.is_empty() || value.contains(['/', '\\']) || value.starts_with('.') {
                    return Err(format!("`name` must be a plain directory name, got `{value}`"));
                }
                self.name = value.to_string();
            }
            "potential" => self.potential = value.parse()?,
            "alpha" => self.alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "kappa_initial" => self.kappa_initial = num(key, value)?,
            "kappa_final" => self.kappa_final = num(key, value)?,
            "step_time" => self.step_time = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "epsilons" => {
                self.epsilons = value
                    .split(',')
                    .map(|v| num::<f64>(key, v.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "particles" => self.particles = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "kernel_width" => self.kernel_width = num(key, value)?,
            "grid_points" => self.grid_points = num(key, value)?,
            "grid_margin" => self.grid_margin = num(key, value)?,
            "regrid_fraction" => self.regrid_fraction = num(key, value)?,
            "snapshot_stride" => self.snapshot_stride = num(key, value)?,
            "density_stride" => self.density_stride = num(key, value)?,
            "drift_max" => self.drift_max = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "trace_particles" => self.trace_particles = num(key, value)?,
            "window_start" => self.window_start = num(key, value)?,
            "band_fraction" => self.band_fraction = num(key, value)?,
            "histogram_bins" => self.histogram_bins = num(key, value)?,
            "confidence_level" => self.confidence_level = num(key, value)?,
            "density_snapshot_stride" => self.density_snapshot_stride = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_harmonic() {
            self.protocol()?;
        } else {
            self.potential_spec()?;
        }
        if self.experiment == ExperimentKind::HarmonicSweep {
            if self.epsilons.is_empty() {
                return Err(Error::invalid("epsilons", "need at least one value"));
            }
            if let Some(e) = self.epsilons.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
                return Err(Error::invalid("epsilons", format!("must be >= 0, got {e}")));
            }
        }
        if !(self.step_time >= 0.0) {
            return Err(Error::invalid("step_time", format!("must be >= 0, got {}", self.step_time)));
        }
        if !(self.band_fraction > 0.0 && self.band_fraction < 1.0) {
            return Err(Error::invalid("band_fraction", format!("must be in (0, 1), got {}", self.band_fraction)));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::invalid(
                "confidence_level",
                format!("must be in (0, 1), got {}", self.confidence_level),
            ));
        }
        if self.histogram_bins < 2 {
            return Err(Error::invalid("histogram_bins", "need at least 2 bins"));
        }
        if !(self.window_start >= 0.0) {
            return Err(Error::invalid("window_start", format!("must be >= 0, got {}", self.window_start)));
        }
        if !(self.grid_margin > 0.0) {
            return Err(Error::invalid("grid_margin", format!("must be positive, got {}", self.grid_margin)));
        }
        if !(self.regrid_fraction > 0.0 && self.regrid_fraction < 1.0) {
            return Err(Error::invalid(
                "regrid_fraction",
                format!("must be in (0, 1), got {}", self.regrid_fraction),
            ));
        }
        if self.grid_points < crate::density::MIN_GRID_POINTS {
            return Err(Error::invalid(
                "grid_points",
                format!("need at least {}, got {}", crate::density::MIN_GRID_POINTS, self.grid_points),
            ));
        }
        if !(self.drift_max >= 0.0) {
            return Err(Error::invalid("drift_max", format!("must be >= 0, got {}", self.drift_max)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be >= 1"));
        }
        self.simulation(self.epsilon)?.validate()
    }

    pub fn is_harmonic(&self) -> bool {
        match self.experiment {
            ExperimentKind::HarmonicStep | ExperimentKind::HarmonicSweep => true,
            ExperimentKind::SingleWell | ExperimentKind::DoubleWell => false,
            ExperimentKind::Custom => self.potential == PotentialKind::Harmonic,
        }
    }

    pub fn protocol(&self) -> Result<StiffnessProtocol> {
        StiffnessProtocol::step(self.kappa_initial, self.kappa_final, self.step_time)
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        if self.is_harmonic() {
            Ok(PotentialSpec::Harmonic {
                protocol: self.protocol()?,
            })
        } else {
            PotentialSpec::quartic(self.alpha, self.beta)
        }
    }

    /// Simulation settings for one run at the given `epsilon`.
    pub fn simulation(&self, epsilon: f64) -> Result<SimulationConfig> {
        let mut c = SimulationConfig::new(self.potential_spec()?);
        c.particles = self.particles;
        c.dt = self.dt;
        c.steps = self.steps;
        c.epsilon = epsilon;
        c.kernel_width = self.kernel_width;
        c.grid = GridPolicy::Auto {
            points: self.grid_points,
            margin: self.grid_margin,
            regrid_fraction: self.regrid_fraction,
        };
        c.seed = self.seed;
        c.snapshot_stride = self.snapshot_stride;
        c.density_stride = self.density_stride;
        c.drift_max = (self.drift_max > 0.0).then_some(self.drift_max);
        c.initial = InitialCondition::Equilibrium;
        c.retain_positions = true;
        c.workers = (self.workers > 0).then_some(self.workers);
        Ok(c)
    }

    /// Every key with its effective value, in a form `parse` accepts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    /// Commented listing of every key and its value.
    pub fn documented_text(&self) -> String {
        let mut out = format!("# {}: {}\n", self.experiment.name(), self.experiment.summary());
        for (key, doc) in KEYS {
            let _ = writeln!(out, "\n# {doc}\n{key} = {}", self.value_of(key));
        }
        out
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "experiment" => self.experiment.name().to_string(),
            "name" => self.name.clone(),
            "potential" => match self.potential {
                PotentialKind::Quartic => "quartic".into(),
                PotentialKind::Harmonic => "harmonic".into(),
            },
            "alpha" => self.alpha.to_string(),
            "beta" => self.beta.to_string(),
            "kappa_initial" => self.kappa_initial.to_string(),
            "kappa_final" => self.kappa_final.to_string(),
            "step_time" => self.step_time.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "epsilons" => self.epsilons.iter().map(f64::to_string).collect::<Vec<_>>().join(", "),
            "particles" => self.particles.to_string(),
            "steps" => self.steps.to_string(),
            "dt" => self.dt.to_string(),
            "seed" => self.seed.to_string(),
            "kernel_width" => self.kernel_width.to_string(),
            "grid_points" => self.grid_points.to_string(),
            "grid_margin" => self.grid_margin.to_string(),
            "regrid_fraction" => self.regrid_fraction.to_string(),
            "snapshot_stride" => self.snapshot_stride.to_string(),
            "density_stride" => self.density_stride.to_string(),
            "drift_max" => self.drift_max.to_string(),
            "workers" => self.workers.to_string(),
            "trace_particles" => self.trace_particles.to_string(),
            "window_start" => self.window_start.to_string(),
            "band_fraction" => self.band_fraction.to_string(),
            "histogram_bins" => self.histogram_bins.to_string(),
            "confidence_level" => self.confidence_level.to_string(),
            "density_snapshot_stride" => self.density_snapshot_stride.to_string(),
            _ => unreachable!("key table and value_of disagree on `{key}`"),
        }
    }
}

/// Where run directories go: `$BOHM_ANALOG_OUT`, else `./runs`.
pub const OUTPUT_ROOT_VAR: &str = "BOHM_ANALOG_OUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}
