"""Smoke test for the Python bindings.

    pip install --no-build-isolation -e crates/python
    python python/smoke_test.py
"""

import math
import tempfile
from pathlib import Path

import bohm_analog_py as ba


def main():
    well = ba.Potential.quartic(-1.0, 0.1)
    assert abs(well.well_minimum() - math.sqrt(5.0)) < 1e-12
    assert well.force(0.0) == 0.0

    sim = ba.Simulation(well, particles=500, steps=40, epsilon=2.0, seed=3)
    quantum = sim.run()
    classical = sim.run(coupled=False)
    assert len(quantum) == 41 and len(quantum.positions[0]) == 500
    assert quantum.positions != classical.positions
    assert sim.run().positions == quantum.positions, "runs are not deterministic"
    values, errors = quantum.autocorrelation(1.0, [0.0, 0.5, 1.0])
    assert values[0] == 1.0 and len(errors) == 3

    x, n = ba.estimate_density(quantum.positions[-1], -8.0, 8.0, 512, 0.8)
    dx = x[1] - x[0]
    assert abs(sum(n) * dx - 1.0) < 1e-3

    s_star = ba.stationary_variance(1.0, 2.0)
    assert abs(s_star - 2.0) < 1e-12
    t, s, kappa_bar = ba.variance_ode(2.0, 0.5, 1.0, 1.8, 0.01, 20.0)
    assert abs(s[-1] - ba.stationary_variance(0.5, 1.8)) < 1e-6
    assert abs(kappa_bar[-1] * s[-1] - 1.0) < 1e-6

    lo, hi = ba.variance_confidence_interval(1.0, 1000, 0.997)
    assert lo < 1.0 < hi

    durations, labels = ba.residency_times(
        [0.1 * k for k in range(8)], [-2.2, -2.1, 2.2, 2.1, 2.3, -2.2, -2.0, 2.2], math.sqrt(5.0)
    )
    assert durations and set(labels) <= {-1, 1}

    try:
        ba.Potential.quartic(1.0, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("a non-confining potential was accepted")

    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "step.cfg"
        cfg.write_text("experiment = harmonic-step\nparticles = 500\nsteps = 100\n")
        out = Path(ba.run_experiment(str(cfg), tmp))
        assert (out / "manifest.json").exists()
        assert (out / "quantum" / "variance.csv").read_text().startswith("time,S_ode,")

    assert "experiment = double-well" in ba.preset("double-well")
    print(f"bohm_analog_py {ba.__version__}: ok")


if __name__ == "__main__":
    main()
