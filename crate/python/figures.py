"""Figure entry point: `figures <kind> --in <run dir> --out <file>`.

Only the interface and the input schema checks live here; rendering is not
implemented.
"""

import argparse
import csv
import sys
from pathlib import Path

SCHEMAS = {
    "snapshots.csv": ["time", "particle_id", "x"],
    "moments.csv": ["time", "mean", "var", "skew", "kurt"],
    "density": ["x", "n", "V_Bohm", "drift"],
    "autocorr.csv": ["lag", "classical", "quantum"],
    "residency.csv": ["duration", "label"],
    "variance.csv": ["time", "S_ode", "S_ensemble", "ci_lo", "ci_hi"],
    "stiffness.csv": ["time", "kappa", "kappa_bar", "kappa_bar_cl"],
    "histogram.csv": ["x", "classical", "quantum"],
}

# Files each figure reads, relative to the run directory.
RECIPES = {
    "fig2": ["quantum/snapshots.csv", "classical/snapshots.csv", "histogram.csv", "autocorr.csv"],
    "fig3": ["quantum/residency.csv", "classical/residency.csv"],
    "fig4": ["quantum/variance.csv", "classical/variance.csv", "stiffness.csv"],
    "moments": ["quantum/moments.csv", "classical/moments.csv"],
    "force-fit": ["density_mean.csv"],
}


def schema_for(path):
    name = Path(path).name
    return SCHEMAS["density"] if name.startswith("density_") else SCHEMAS[name]


def check_inputs(run_dir, kind):
    problems = []
    for rel in RECIPES[kind]:
        path = run_dir / rel
        if not path.exists():
            problems.append(f"{rel}: missing")
            continue
        with path.open(newline="") as f:
            header = next(csv.reader(f), [])
        expected = schema_for(rel)
        if header != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            problems.append(f"{rel}: missing columns {missing}, unexpected columns {extra}")
    return problems


def main(argv=None):
    parser = argparse.ArgumentParser(prog="figures")
    parser.add_argument("kind", choices=sorted(RECIPES))
    parser.add_argument("--in", dest="run_dir", required=True, type=Path)
    parser.add_argument("--out", required=True, type=Path)
    args = parser.parse_args(argv)

    problems = check_inputs(args.run_dir, args.kind)
    if problems:
        for p in problems:
            print(f"schema: {p}", file=sys.stderr)
        return 2
    print(f"{args.kind}: inputs match the documented schemas; rendering is not implemented", file=sys.stderr)
    return 3


if __name__ == "__main__":
    sys.exit(main())
