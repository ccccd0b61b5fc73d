use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bohm_analog::config::{ExperimentKind, RunConfig};
use bohm_analog::output::RunManifest;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bohm-analog"));
    c.env_remove("BOHM_ANALOG_OUT").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_WELL: &str = "\
experiment = single-well
particles = 300
steps = 60
window_start = 2
density_snapshot_stride = 30
";

fn checksums(dir: &Path) -> Vec<(String, String)> {
    let m = RunManifest::read(dir).unwrap();
    m.verify(dir).unwrap();
    m.files.into_iter().map(|f| (f.path, f.sha256)).collect()
}

#[test]
fn same_config_and_seed_give_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", SMALL_WELL);
    let root = tmp.path().join("out");
    let root = root.to_str().unwrap();
    assert!(run(&["run", &cfg, "--out-root", root, "--name", "one"]).status.success());
    let o = bin()
        .args(["run", &cfg, "--out-root", root, "--name", "two"])
        .env("RAYON_NUM_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (checksums(&tmp.path().join("out/one")), checksums(&tmp.path().join("out/two")));
    assert!(a.len() >= 8);
    assert_eq!(a, b);

    let seeded = write_config(tmp.path(), "b.cfg", &format!("{SMALL_WELL}seed = 2\n"));
    assert!(run(&["run", &seeded, "--out-root", root, "--name", "three"]).status.success());
    assert_ne!(a, checksums(&tmp.path().join("out/three")));
}

#[test]
fn analyze_reproduces_the_run_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", SMALL_WELL);
    let root = tmp.path().to_str().unwrap();
    assert!(run(&["run", &cfg, "--out-root", root, "--name", "r"]).status.success());
    let o = run(&["analyze", tmp.path().join("r").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (run_dir, analysis) = (tmp.path().join("r"), tmp.path().join("r-analysis"));
    for f in ["quantum/moments.csv", "classical/moments.csv", "autocorr.csv", "histogram.csv"] {
        assert_eq!(fs::read(run_dir.join(f)).unwrap(), fs::read(analysis.join(f)).unwrap(), "{f}");
    }
    let first = checksums(&analysis);
    let o = run(&["analyze", run_dir.to_str().unwrap(), "--force"]);
    assert!(o.status.success());
    assert_eq!(first, checksums(&analysis));
}

#[test]
fn double_well_run_writes_residency_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "dw.cfg",
        "experiment = double-well\nparticles = 200\nsteps = 300\ntrace_particles = 0\nwindow_start = 5\n",
    );
    let root = tmp.path().to_str().unwrap();
    assert!(run(&["run", &cfg, "--out-root", root]).status.success());
    let dir = tmp.path().join("double-well");
    let text = fs::read_to_string(dir.join("quantum/residency.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("duration,label"));
    assert!(lines.all(|l| l.ends_with(",1") || l.ends_with(",-1")));
    let m = RunManifest::read(&dir).unwrap();
    assert!(m.results["quantum"]["residency"]["dwell_count"].as_u64().unwrap() > 0);
    assert_eq!(m.counters.len(), 2);
}

#[test]
fn harmonic_step_writes_variance_and_stiffness() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "hs.cfg", "experiment = harmonic-step\nparticles = 2000\nsteps = 400\n");
    let root = tmp.path().to_str().unwrap();
    assert!(run(&["run", &cfg, "--out-root", root]).status.success());
    let dir = tmp.path().join("harmonic-step");
    for sub in ["quantum", "quantum_ou", "classical"] {
        let text = fs::read_to_string(dir.join(sub).join("variance.csv")).unwrap();
        assert!(text.starts_with("time,S_ode,S_ensemble,ci_lo,ci_hi\n"));
        assert_eq!(text.lines().count(), 42);
    }
    let text = fs::read_to_string(dir.join("stiffness.csv")).unwrap();
    assert!(text.starts_with("time,kappa,kappa_bar,kappa_bar_cl\n"));
    let m = RunManifest::read(&dir).unwrap();
    assert!((m.results["S_final"].as_f64().unwrap() - 3.0591260281974).abs() < 1e-9);
}

#[test]
fn config_errors_name_the_line_and_leave_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("out");
    for (text, needle) in [
        ("experiment = single-well\nparticels = 10\n", "cfg:2:"),
        ("steps = 10\nsteps = 20\n", "cfg:2:"),
        ("# comment\ndt = fast\n", "cfg:2:"),
        ("particles = 0\n", "cfg:1:"),
        ("just words\n", "cfg:1:"),
    ] {
        let cfg = write_config(tmp.path(), "bad.cfg", text);
        let o = run(&["run", &cfg, "--out-root", root.to_str().unwrap()]);
        assert!(!o.status.success(), "{text}");
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
    assert!(!root.exists() || fs::read_dir(&root).unwrap().next().is_none());
    let o = run(&["run", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn failed_run_removes_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    // Passes validation but the stationary window starts after the run ends.
    let cfg = write_config(tmp.path(), "late.cfg", "experiment = single-well\nparticles = 100\nsteps = 20\nwindow_start = 50\n");
    let root = tmp.path().join("out");
    let o = run(&["run", &cfg, "--out-root", root.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("window_start"), "{}", stderr(&o));
    assert_eq!(fs::read_dir(&root).unwrap().count(), 0);
}

#[test]
fn existing_run_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "experiment = harmonic-step\nparticles = 100\nsteps = 20\n");
    let root = tmp.path().to_str().unwrap();
    assert!(run(&["run", &cfg, "--out-root", root]).status.success());
    let o = run(&["run", &cfg, "--out-root", root]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--force"));
    assert!(run(&["run", &cfg, "--out-root", root, "--force"]).status.success());
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "experiment = harmonic-step\nparticles = 100\nsteps = 20\n");
    let o = bin().args(["run", &cfg]).env("BOHM_ANALOG_OUT", tmp.path().join("env")).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("env/harmonic-step/manifest.json").exists());
}

#[test]
fn presets_print_parseable_documented_configs() {
    let o = run(&["presets"]);
    let listing = String::from_utf8(o.stdout).unwrap();
    for kind in ExperimentKind::ALL {
        assert!(listing.contains(kind.name()));
        let o = run(&["presets", kind.name()]);
        assert!(o.status.success());
        let text = String::from_utf8(o.stdout).unwrap();
        assert!(text.contains("# "));
        let parsed = RunConfig::parse(&text, Path::new("preset")).unwrap();
        assert_eq!(parsed, RunConfig::preset(kind));
    }
    assert!(!run(&["presets", "triple-well"]).status.success());
}

#[test]
fn ode_subcommand_writes_the_variance_curve() {
    let o = run(&["ode", "--epsilon", "1.8", "--dt", "0.01", "--horizon", "30"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,S_ode,kappa,kappa_bar"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3001);
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    assert!((first[1] - 1.1840770846134703).abs() < 1e-12);
    assert!((last[1] - 3.0591260281974).abs() < 1e-6);
    // kappa_bar = 1/S at equilibrium.
    assert!((last[3] * last[1] - 1.0).abs() < 1e-6);

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ode.csv");
    assert!(run(&["ode", "--s0", "1", "--out", out.to_str().unwrap()]).status.success());
    assert!(fs::read_to_string(out).unwrap().lines().nth(1).unwrap().starts_with("0,1,"));
    assert!(!run(&["ode", "--dt", "-1"]).status.success());
}
