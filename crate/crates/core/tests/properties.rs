use bohm_analog::bohm::{gaussian_quantum_drift, quantum_drift, DriftOptions};
use bohm_analog::density::{estimate_density, DensityField, GridSpec};
use bohm_analog::gaussian::{integrate_variance_ode, run_variance_feedback, stationary_variance, OuConfig};
use bohm_analog::observables::variance_confidence_interval;
use bohm_analog::rng::{CounterRng, Stream};
use bohm_analog::sde::{run_classical, run_mckean_vlasov, SimulationConfig, TrajectoryArchive};
use bohm_analog::{PotentialSpec, StiffnessProtocol};
use proptest::prelude::*;

fn bits(a: &TrajectoryArchive) -> Vec<u64> {
    a.positions.iter().flatten().map(|x| x.to_bits()).collect()
}

fn double_well(seed: u64, eps: f64) -> SimulationConfig {
    let mut cfg = SimulationConfig::new(PotentialSpec::quartic(-1.0, 0.1).unwrap());
    cfg.particles = 700;
    cfg.steps = 25;
    cfg.epsilon = eps;
    cfg.seed = seed;
    cfg
}

fn gaussian_field(variance: f64, grid: GridSpec) -> DensityField {
    let norm = (2.0 * std::f64::consts::PI * variance).sqrt();
    let values = grid.nodes().iter().map(|x| (-x * x / (2.0 * variance)).exp() / norm).collect();
    DensityField::from_values(grid, values, 0.0).unwrap()
}

fn max_drift_error(variance: f64, eps: f64, points: usize) -> f64 {
    let grid = GridSpec::symmetric(8.0 * variance.sqrt(), points).unwrap();
    let drift = quantum_drift(&gaussian_field(variance, grid), eps, &DriftOptions::default()).unwrap();
    let reach = 3.0 * variance.sqrt();
    let scale = gaussian_quantum_drift(variance, eps, reach).unwrap().abs();
    grid.nodes()
        .iter()
        .zip(drift.values())
        .filter(|(x, _)| x.abs() <= reach)
        .map(|(&x, &d)| (d - gaussian_quantum_drift(variance, eps, x).unwrap()).abs() / scale)
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn worker_count_never_changes_results(seed in 0u64..1_000_000, workers in 2usize..6) {
        let cfg = double_well(seed, 2.0);
        let mut other = cfg.clone();
        other.workers = Some(workers);
        let mut single = cfg.clone();
        single.workers = Some(1);
        let reference = bits(&run_mckean_vlasov(&single).unwrap());
        prop_assert_eq!(&reference, &bits(&run_mckean_vlasov(&other).unwrap()));
        prop_assert_eq!(&reference, &bits(&run_mckean_vlasov(&cfg).unwrap()));
    }

    #[test]
    fn zero_epsilon_is_the_classical_path(seed in 0u64..1_000_000) {
        let cfg = double_well(seed, 0.0);
        prop_assert_eq!(bits(&run_mckean_vlasov(&cfg).unwrap()), bits(&run_classical(&cfg).unwrap()));
    }
}

proptest! {
    #[test]
    fn kde_is_normalized_and_inflates_variance_by_h2(
        seed in any::<u64>(),
        n in 50usize..2000,
        sigma in 0.2f64..2.0,
        shift in -1.0f64..1.0,
        h in 0.1f64..1.0,
    ) {
        let rng = CounterRng::new(seed);
        let xs: Vec<f64> = (0..n as u64).map(|i| shift + sigma * rng.normal(Stream::Synthetic, i, 0)).collect();
        let reach = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let grid = GridSpec::symmetric(reach + 6.0 * h, 2048).unwrap();
        let field = estimate_density(&xs, &grid, h).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        prop_assert!((field.integral() - 1.0).abs() < 1e-5);
        prop_assert!((field.mean() - mean).abs() < 1e-5 * (1.0 + mean.abs()));
        prop_assert!((field.variance() - (var + h * h)).abs() < 1e-4 * (var + h * h));
        prop_assert!(field.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn gaussian_drift_matches_closed_form(variance in 0.3f64..4.0, eps in 0.2f64..4.0) {
        prop_assert!(max_drift_error(variance, eps, 512) <= 0.01);
    }

    #[test]
    fn drift_stencil_converges_at_second_order(variance in 0.3f64..4.0) {
        let (coarse, fine) = (max_drift_error(variance, 1.0, 128), max_drift_error(variance, 1.0, 256));
        prop_assert!(coarse / fine >= 3.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn variance_ode_settles_at_the_stationary_root(kappa in 0.2f64..4.0, eps in 0.0f64..3.0, s0 in 0.2f64..5.0) {
        let protocol = StiffnessProtocol::constant(kappa).unwrap();
        let s_star = stationary_variance(kappa, eps).unwrap();
        let horizon = 20.0 / kappa;
        let ode = integrate_variance_ode(&protocol, eps, s0, 0.01, horizon).unwrap();
        let (_, last) = ode.last().unwrap();
        prop_assert!((last - s_star).abs() < 1e-6 * s_star);
        // Monotone approach: the right-hand side has a single positive root.
        let sign = (s_star - s0).signum();
        prop_assert!(ode.values().windows(2).all(|w| sign * (w[1] - w[0]) >= -1e-12));
    }
}

#[test]
fn confidence_interval_coverage() {
    let (trials, size) = (10_000u64, 100usize);
    let rng = CounterRng::new(4242);
    let covered = (0..trials)
        .filter(|&t| {
            let mut stream = rng.stream(Stream::Synthetic, t);
            let s: Vec<f64> = (0..size).map(|_| 2.0 * stream.normal()).collect();
            let m = s.iter().sum::<f64>() / size as f64;
            let v = s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (size - 1) as f64;
            let (lo, hi) = variance_confidence_interval(v, size, 0.997).unwrap();
            lo <= 4.0 && 4.0 <= hi
        })
        .count();
    assert!(covered as f64 / trials as f64 >= 0.994, "coverage {covered}/{trials}");
}

#[test]
fn feedback_ensemble_follows_the_variance_ode() {
    let (eps, s_i) = (1.8, stationary_variance(2.0, 1.8).unwrap());
    let protocol = StiffnessProtocol::step(2.0, 0.5, 1.0).unwrap();
    let cfg = OuConfig {
        particles: 20_000,
        dt: 0.01,
        steps: 800,
        seed: 5,
        initial_variance: s_i,
        snapshot_stride: 20,
        retain_positions: false,
        workers: None,
    };
    let archive = run_variance_feedback(&protocol, eps, &cfg).unwrap();
    let ode = integrate_variance_ode(&protocol, eps, s_i, cfg.dt, 8.0).unwrap();
    for (t, m) in archive.times.iter().zip(&archive.summaries) {
        let s = m.unwrap().variance;
        let (lo, hi) = variance_confidence_interval(s, cfg.particles, 0.997).unwrap();
        let s_ode = ode.at(*t).unwrap();
        // Allow the Euler step bias on top of sampling noise.
        assert!(s_ode >= lo * 0.98 && s_ode <= hi * 1.02, "t = {t}: {s} vs {s_ode}");
    }
}
