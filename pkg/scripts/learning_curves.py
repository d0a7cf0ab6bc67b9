"""Theoretical and simulated learning curves on the 5-node reference network.

Writes curve_theory_p{p}.csv and curve_sim_p{p}.csv for each failure
probability and prints the steady-state comparison.

    python scripts/learning_curves.py --out runs/curves --runs 100 --iters 20000
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from lossy_diffusion.combiners import CombiningRule
from lossy_diffusion.errors import uniform_error_model
from lossy_diffusion.montecarlo import run_diffusion, steady_state_estimate
from lossy_diffusion.results import to_db, write_curve_csv
from lossy_diffusion.theory import (
    SpatialCorrelation,
    TrueParameter,
    build_moment_system,
    make_profiles,
    scalar_coefficients,
    steady_state_msd,
    transient_theory_curve,
    weight_moments,
)
from lossy_diffusion.topology import random_geometric


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("runs/curves"))
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--iters", type=int, default=20000)
    ap.add_argument("--window", type=int, default=1000)
    ap.add_argument("--p", type=float, nargs="+", default=[0.0, 0.3, 0.9])
    ap.add_argument("--stride", type=int, default=50)
    args = ap.parse_args()

    topo = random_geometric(5, 100.0, 50.0, seed=3)
    rng = np.random.default_rng(7)
    sv2 = 10.0 ** rng.uniform(-4, -2, 5)
    su2 = rng.uniform(0.5, 1.5, 5)
    prof = make_profiles(0.01, su2, sv2)
    corr = SpatialCorrelation.index(0.5, 5)
    w_o = TrueParameter.normalized_ones(16)
    rule = CombiningRule("relative_variance")
    coeffs = scalar_coefficients(prof, corr, w_o.m)
    args.out.mkdir(parents=True, exist_ok=True)

    for p in args.p:
        err = uniform_error_model(topo, p)
        system = build_moment_system(coeffs, weight_moments(rule, topo, err, sv2))
        th_curve = transient_theory_curve(system, w_o, args.iters)
        sim_curve = run_diffusion(topo, prof, corr, w_o, rule, err, args.iters, args.runs, seed=1)
        write_curve_csv(args.out / f"curve_theory_p{p}.csv", th_curve, args.stride)
        write_curve_csv(args.out / f"curve_sim_p{p}.csv", sim_curve, args.stride)
        th = steady_state_msd(system, w_o).local
        sim = steady_state_estimate(sim_curve, args.window)[0]
        delta = to_db(sim) - to_db(th)
        print(f"p={p}: theory {to_db(th.mean()):.3f} dB, simulation {to_db(sim.mean()):.3f} dB, "
              f"per-node delta {np.array2string(delta, precision=3)}")


if __name__ == "__main__":
    main()
