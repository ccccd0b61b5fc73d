//! Orchestration of the preset studies and their output tables.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde_json::{json, Value};

use crate::bohm::bohm_potential_field;
use crate::config::{ExperimentKind, RunConfig};
use crate::density::GridSpec;
use crate::error::{Error, Result};
use crate::gaussian::{
    classical_equivalent_step, integrate_variance_ode, modified_stiffness, run_ou_process, run_variance_feedback,
    stationary_variance, OuConfig, VarianceSeries,
};
use crate::observables::{
    autocorrelation, fit_boltzmann_form, fit_cubic_force, fit_exponential, settling_time, variance_confidence_interval,
    BoltzmannFit, BoltzmannForm, Histogram, ResidencyRecord, ResidencyTracker,
};
use crate::output::{self, fmt, RunDir, RunManifest};
use crate::potentials::StiffnessSchedule;
use crate::sde::{
    simulate, ArchiveRecorder, Coupling, Ensemble, FieldView, MeanFieldAccumulator, RunCounters, StepObserver,
    TrajectoryArchive,
};

/// Relative distance to the final variance that counts as relaxed.
pub const SETTLE_TOLERANCE: f64 = 0.05;

/// Runs the configured study into `root/<name>` and returns that path.
pub fn run_experiment(cfg: &RunConfig, root: &Path, overwrite: bool) -> Result<PathBuf> {
    cfg.validate()?;
    let start = Instant::now();
    let mut run = RunDir::create(root, &cfg.name, overwrite)?;
    let mut counters = Vec::new();
    let results = match cfg.experiment {
        ExperimentKind::SingleWell => well_study(cfg, &mut run, &mut counters, false)?,
        ExperimentKind::DoubleWell => well_study(cfg, &mut run, &mut counters, true)?,
        ExperimentKind::Custom if cfg.is_harmonic() => harmonic_step(cfg, cfg.epsilon, "", &mut run, &mut counters)?,
        ExperimentKind::Custom => well_study(cfg, &mut run, &mut counters, cfg.alpha < 0.0)?,
        ExperimentKind::HarmonicStep => harmonic_step(cfg, cfg.epsilon, "", &mut run, &mut counters)?,
        ExperimentKind::HarmonicSweep => {
            let mut per_eps = Vec::new();
            for &eps in &cfg.epsilons {
                let prefix = format!("eps_{eps}/");
                per_eps.push(harmonic_step(cfg, eps, &prefix, &mut run, &mut counters)?);
            }
            Value::Array(per_eps)
        }
    };
    let manifest = RunManifest {
        schema_version: output::SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.name().to_string(),
        seed: cfg.seed,
        config: cfg.to_text(),
        counters,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: Vec::new(),
        results,
    };
    let dir = run.commit(manifest)?;
    info!("wrote {}", dir.display());
    Ok(dir)
}

/// Density, Bohm potential and drift fields captured every `stride` steps.
struct FieldSnapshots {
    stride: u64,
    epsilon: f64,
    fields: Vec<(f64, Vec<Vec<String>>)>,
}

impl StepObserver for FieldSnapshots {
    fn observe(&mut self, ensemble: &Ensemble, field: Option<FieldView<'_>>) {
        let Some(field) = field else { return };
        if self.stride == 0 || !ensemble.step_index.is_multiple_of(self.stride) {
            return;
        }
        let Ok(potential) = bohm_potential_field(field.density, self.epsilon) else {
            return;
        };
        let grid = field.density.grid();
        let rows = (0..grid.points())
            .map(|j| {
                vec![
                    fmt(grid.node(j)),
                    fmt(field.density.values()[j]),
                    fmt(potential[j]),
                    fmt(field.drift.values()[j]),
                ]
            })
            .collect();
        self.fields.push((ensemble.time, rows));
    }
}

fn write_run_tables(run: &mut RunDir, dir: &str, archive: &TrajectoryArchive, cfg: &RunConfig) -> Result<()> {
    run.write_csv(
        &format!("{dir}/snapshots.csv"),
        &output::SNAPSHOTS_HEADER,
        output::snapshot_rows(archive, cfg.trace_particles),
    )?;
    run.write_csv(&format!("{dir}/moments.csv"), &output::MOMENTS_HEADER, output::moment_rows(archive))
}

/// Writes `autocorr.csv` from the first snapshot at or after `window_start`
/// and returns that origin.
pub fn write_autocorr(
    run: &mut RunDir,
    prefix: &str,
    quantum: &TrajectoryArchive,
    classical: &TrajectoryArchive,
    window_start: f64,
) -> Result<f64> {
    let i0 = quantum
        .times
        .iter()
        .position(|&t| t >= window_start - 1e-9)
        .ok_or_else(|| Error::InsufficientData(format!("no snapshot at or after t = {window_start}")))?;
    let t0 = quantum.times[i0];
    let lags: Vec<f64> = quantum.times[i0..].iter().map(|t| t - t0).collect();
    let cq = autocorrelation(quantum, t0, &lags)?;
    let cc = autocorrelation(classical, t0, &lags)?;
    run.write_csv(
        &format!("{prefix}autocorr.csv"),
        &output::AUTOCORR_HEADER,
        lags.iter()
            .enumerate()
            .map(|(k, l)| vec![fmt(*l), fmt(cc.values[k]), fmt(cq.values[k])]),
    )?;
    Ok(t0)
}

/// Writes `histogram.csv` of positions pooled from `window_start` on, both
/// ensembles binned on a common symmetric range, and fits the quartic
/// Boltzmann form to each (quantum, classical).
pub fn write_histogram(
    run: &mut RunDir,
    prefix: &str,
    quantum: &TrajectoryArchive,
    classical: &TrajectoryArchive,
    window_start: f64,
    bins: usize,
) -> Result<(Option<BoltzmannFit>, Option<BoltzmannFit>)> {
    let pq = pooled_positions(quantum, window_start);
    let pc = pooled_positions(classical, window_start);
    let extent = pq.iter().chain(&pc).fold(0.0f64, |m, x| m.max(x.abs()));
    let range = Some((-extent, extent));
    let hq = Histogram::new(&pq, bins, range)?;
    let hc = Histogram::new(&pc, bins, range)?;
    run.write_csv(
        &format!("{prefix}histogram.csv"),
        &output::HISTOGRAM_HEADER,
        hq.centers()
            .iter()
            .enumerate()
            .map(|(k, x)| vec![fmt(*x), fmt(hc.density[k]), fmt(hq.density[k])]),
    )?;
    Ok((
        fit_boltzmann_form(&hq, BoltzmannForm::Quartic).ok(),
        fit_boltzmann_form(&hc, BoltzmannForm::Quartic).ok(),
    ))
}

fn write_residency(run: &mut RunDir, dir: &str, record: &ResidencyRecord) -> Result<Value> {
    run.write_csv(
        &format!("{dir}/residency.csv"),
        &output::RESIDENCY_HEADER,
        record
            .durations
            .iter()
            .zip(&record.labels)
            .map(|(d, l)| vec![fmt(*d), l.sign().to_string()]),
    )?;
    let fit = fit_exponential(&record.durations).ok();
    Ok(json!({
        "dwell_count": record.len(),
        "mean_dwell": record.mean_duration(),
        "band": record.band,
        "diagnostic": record.diagnostic,
        "exponential_fit": fit,
    }))
}

/// Positions pooled over the snapshots at or after `t0`.
fn pooled_positions(archive: &TrajectoryArchive, t0: f64) -> Vec<f64> {
    archive
        .times
        .iter()
        .zip(&archive.positions)
        .filter(|(t, _)| **t >= t0 - 1e-9)
        .flat_map(|(_, p)| p.iter().copied())
        .collect()
}

fn well_study(cfg: &RunConfig, run: &mut RunDir, counters: &mut Vec<(String, RunCounters)>, residency: bool) -> Result<Value> {
    let quantum_cfg = cfg.simulation(cfg.epsilon)?;
    let classical_cfg = cfg.simulation(0.0)?;
    let horizon = cfg.steps as f64 * cfg.dt;
    if cfg.window_start >= horizon {
        return Err(Error::invalid(
            "window_start",
            format!("{} is not before the end of the run ({horizon})", cfg.window_start),
        ));
    }
    let x_min = quantum_cfg.potential.well_minimum();
    let tracker = |n| -> Result<Option<ResidencyTracker>> {
        match (residency, x_min) {
            (true, Some(xm)) => Ok(Some(ResidencyTracker::new(n, xm, cfg.band_fraction)?)),
            _ => Ok(None),
        }
    };

    let mean_grid = GridSpec::symmetric(6.0, 241)?;
    let mut quantum = (
        ArchiveRecorder::new(cfg.snapshot_stride, true, cfg.steps),
        (
            MeanFieldAccumulator::new(mean_grid, cfg.epsilon, cfg.window_start, horizon),
            (
                FieldSnapshots {
                    stride: cfg.density_snapshot_stride,
                    epsilon: cfg.epsilon,
                    fields: Vec::new(),
                },
                OptionalObserver(tracker(cfg.particles)?),
            ),
        ),
    );
    let q_counters = simulate(&quantum_cfg, Coupling::McKeanVlasov, &mut quantum)?;
    let (q_recorder, (mean_field, (snapshots, OptionalObserver(q_tracker)))) = quantum;
    let q_archive = q_recorder.finish(q_counters);

    let mut classical = (
        ArchiveRecorder::new(cfg.snapshot_stride, true, cfg.steps),
        OptionalObserver(tracker(cfg.particles)?),
    );
    let c_counters = simulate(&classical_cfg, Coupling::Classical, &mut classical)?;
    let (c_recorder, OptionalObserver(c_tracker)) = classical;
    let c_archive = c_recorder.finish(c_counters);
    counters.push(("quantum".into(), q_counters));
    counters.push(("classical".into(), c_counters));

    write_run_tables(run, "quantum", &q_archive, cfg)?;
    write_run_tables(run, "classical", &c_archive, cfg)?;

    let t0 = write_autocorr(run, "", &q_archive, &c_archive, cfg.window_start)?;
    let (fit_q, fit_c) = write_histogram(run, "", &q_archive, &c_archive, cfg.window_start, cfg.histogram_bins)?;

    // Time-averaged fields and the odd-cubic fit of the mean drift where
    // the mean density is appreciable.
    let n_mean = mean_field.mean_density();
    let v_mean = mean_field.mean_potential();
    let d_mean = mean_field.mean_drift();
    let nodes = mean_grid.nodes();
    run.write_csv(
        "density_mean.csv",
        &output::DENSITY_HEADER,
        (0..nodes.len()).map(|j| vec![fmt(nodes[j]), fmt(n_mean[j]), fmt(v_mean[j]), fmt(d_mean[j])]),
    )?;
    let n_peak = n_mean.iter().copied().fold(0.0, f64::max);
    let (xs, ds): (Vec<f64>, Vec<f64>) = nodes
        .iter()
        .zip(&d_mean)
        .zip(&n_mean)
        .filter(|(_, &n)| n >= 0.05 * n_peak)
        .map(|((x, d), _)| (*x, *d))
        .unzip();
    let force_fit = if cfg.epsilon > 0.0 {
        fit_cubic_force(&xs, &ds, mean_field.samples()).ok()
    } else {
        None
    };
    for (t, rows) in snapshots.fields {
        run.write_csv(&format!("density_t{t}.csv"), &output::DENSITY_HEADER, rows)?;
    }

    let mut results = json!({
        "quantum": {
            "final_moments": q_archive.summaries.last().copied().flatten(),
            "boltzmann_fit": fit_q,
        },
        "classical": {
            "final_moments": c_archive.summaries.last().copied().flatten(),
            "boltzmann_fit": fit_c,
        },
        "autocorrelation_t0": t0,
        "mean_field_samples": mean_field.samples(),
        "cubic_force_fit": force_fit,
    });
    if let (Some(qt), Some(ct)) = (q_tracker, c_tracker) {
        results["quantum"]["residency"] = write_residency(run, "quantum", &qt.pooled())?;
        results["classical"]["residency"] = write_residency(run, "classical", &ct.pooled())?;
    }
    Ok(results)
}

/// Observer slot that may be empty.
struct OptionalObserver<T>(Option<T>);

impl<T: StepObserver> StepObserver for OptionalObserver<T> {
    fn observe(&mut self, ensemble: &Ensemble, field: Option<FieldView<'_>>) {
        if let Some(o) = &mut self.0 {
            o.observe(ensemble, field);
        }
    }
}

fn variance_rows(archive: &TrajectoryArchive, ode: &VarianceSeries, n: usize, level: f64) -> Result<Vec<Vec<String>>> {
    archive
        .times
        .iter()
        .zip(&archive.summaries)
        .filter_map(|(&t, m)| m.map(|m| (t, m.variance)))
        .map(|(t, s)| {
            let (lo, hi) = variance_confidence_interval(s, n, level)?;
            let s_ode = ode.at(t).map_or(String::new(), fmt);
            Ok(vec![fmt(t), s_ode, fmt(s), fmt(lo), fmt(hi)])
        })
        .collect()
}

fn ensemble_variance(archive: &TrajectoryArchive) -> (Vec<f64>, Vec<f64>) {
    archive
        .times
        .iter()
        .zip(&archive.summaries)
        .filter_map(|(&t, m)| m.map(|m| (t, m.variance)))
        .unzip()
}

fn harmonic_step(
    cfg: &RunConfig,
    epsilon: f64,
    prefix: &str,
    run: &mut RunDir,
    counters: &mut Vec<(String, RunCounters)>,
) -> Result<Value> {
    let protocol = cfg.protocol()?;
    let horizon = cfg.steps as f64 * cfg.dt;
    let s_initial = stationary_variance(protocol.initial_kappa(), epsilon)?;
    let s_final = stationary_variance(protocol.final_kappa(), epsilon)?;

    let ode_q = integrate_variance_ode(&protocol, epsilon, s_initial, cfg.dt, horizon)?;
    let kappa_bar = modified_stiffness(&protocol, &ode_q, epsilon)?;
    // kappa_bar = 1 / S at any quantum equilibrium.
    let (kb_i, kb_f) = (1.0 / s_initial, 1.0 / s_final);
    let cl_protocol = classical_equivalent_step(kb_i, kb_f, cfg.step_time)?;
    let ode_c = integrate_variance_ode(&cl_protocol, 0.0, s_initial, cfg.dt, horizon)?;

    let ou = |initial_variance: f64| OuConfig {
        particles: cfg.particles,
        dt: cfg.dt,
        steps: cfg.steps,
        seed: cfg.seed,
        initial_variance,
        snapshot_stride: cfg.snapshot_stride,
        retain_positions: cfg.trace_particles > 0,
        workers: (cfg.workers > 0).then_some(cfg.workers),
    };
    let feedback = run_variance_feedback(&protocol, epsilon, &ou(s_initial))?;
    let quantum_ou = run_ou_process(&kappa_bar, &ou(s_initial))?;
    let classical = run_ou_process(&cl_protocol, &ou(s_initial))?;
    counters.push((format!("{prefix}quantum"), feedback.counters));
    counters.push((format!("{prefix}quantum_ou"), quantum_ou.counters));
    counters.push((format!("{prefix}classical"), classical.counters));

    let level = cfg.confidence_level;
    let n = cfg.particles;
    let mut settle = serde_json::Map::new();
    for (dir, archive, ode) in [
        ("quantum", &feedback, &ode_q),
        ("quantum_ou", &quantum_ou, &ode_q),
        ("classical", &classical, &ode_c),
    ] {
        let dir = format!("{prefix}{dir}");
        if archive.has_positions() {
            run.write_csv(
                &format!("{dir}/snapshots.csv"),
                &output::SNAPSHOTS_HEADER,
                output::snapshot_rows(archive, cfg.trace_particles),
            )?;
        }
        run.write_csv(&format!("{dir}/moments.csv"), &output::MOMENTS_HEADER, output::moment_rows(archive))?;
        run.write_csv(&format!("{dir}/variance.csv"), &output::VARIANCE_HEADER, variance_rows(archive, ode, n, level)?)?;
        let (t, s) = ensemble_variance(archive);
        settle.insert(
            dir,
            json!({
                "ensemble": settling_time(&t, &s, s_final, SETTLE_TOLERANCE, cfg.step_time),
                "ode": settling_time(ode.times(), ode.values(), s_final, SETTLE_TOLERANCE, cfg.step_time),
            }),
        );
    }

    run.write_csv(
        &format!("{prefix}stiffness.csv"),
        &output::STIFFNESS_HEADER,
        ode_q.times().iter().zip(kappa_bar.values()).map(|(&t, &kb)| {
            vec![
                fmt(t),
                fmt(protocol.kappa_at(t)),
                fmt(kb),
                fmt(cl_protocol.stiffness(t)),
            ]
        }),
    )?;

    Ok(json!({
        "epsilon": epsilon,
        "S_initial": s_initial,
        "S_final": s_final,
        "kappa_bar_initial": kb_i,
        "kappa_bar_final": kb_f,
        "kappa_bar_min": kappa_bar.values().iter().copied().fold(f64::INFINITY, f64::min),
        "kappa_bar_negative_samples": kappa_bar.negative_count(),
        "settling_time": settle,
    }))
}

/// Re-derives the result tables of a finished run from its archived
/// snapshots into `out_root/name`.
///
/// Every `snapshots.csv` yields a `moments.csv` (identical to the run's own
/// when all particles were archived) and, for double wells, a
/// `residency.csv` from the snapshot-sampled traces. Sibling `quantum` and
/// `classical` archives of a well study also yield `autocorr.csv` and
/// `histogram.csv`.
pub fn analyze_run(run_dir: &Path, out_root: &Path, name: &str, overwrite: bool) -> Result<PathBuf> {
    let start = Instant::now();
    let source = RunManifest::read(run_dir)?;
    source.verify(run_dir)?;
    let cfg = RunConfig::parse(&source.config, &run_dir.join(output::MANIFEST_FILE))?;
    let mut run = RunDir::create(out_root, name, overwrite)?;
    let mut results = serde_json::Map::new();

    let mut archives = std::collections::BTreeMap::new();
    for entry in source.files.iter().filter(|f| f.path.ends_with("snapshots.csv")) {
        let dir = entry.path.trim_end_matches("snapshots.csv");
        let archive = output::read_snapshots(&run_dir.join(&entry.path))?;
        run.write_csv(&format!("{dir}moments.csv"), &output::MOMENTS_HEADER, output::moment_rows(&archive))?;
        archives.insert(dir.to_string(), archive);
    }

    let x_min = cfg.potential_spec().ok().and_then(|p| p.well_minimum());
    if let (false, Some(x_min)) = (cfg.is_harmonic(), x_min) {
        for (dir, archive) in &archives {
            let records = (0..archive.positions.first().map_or(0, Vec::len))
                .map(|i| {
                    let trace: Vec<f64> = archive.positions.iter().map(|p| p[i]).collect();
                    crate::observables::residency_times(&archive.times, &trace, x_min, cfg.band_fraction)
                })
                .collect::<Result<Vec<_>>>()?;
            let summary = write_residency(&mut run, dir.trim_end_matches('/'), &ResidencyRecord::pooled(&records))?;
            results.insert(format!("{dir}residency"), summary);
        }
    }

    if !cfg.is_harmonic() {
        if let (Some(q), Some(c)) = (archives.get("quantum/"), archives.get("classical/")) {
            let t0 = write_autocorr(&mut run, "", q, c, cfg.window_start)?;
            let (fit_q, fit_c) = write_histogram(&mut run, "", q, c, cfg.window_start, cfg.histogram_bins)?;
            results.insert("autocorrelation_t0".into(), json!(t0));
            results.insert("quantum_boltzmann_fit".into(), json!(fit_q));
            results.insert("classical_boltzmann_fit".into(), json!(fit_c));
        }
    }

    let manifest = RunManifest {
        schema_version: output::SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: format!("analysis of {}", source.experiment),
        seed: source.seed,
        config: source.config,
        counters: Vec::new(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: Vec::new(),
        results: Value::Object(results),
    };
    run.commit(manifest)
}
