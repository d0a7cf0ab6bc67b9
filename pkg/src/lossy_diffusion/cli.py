"""Command-line front end: ``lossy-diffusion <command> --config scenario.toml``."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lossy_diffusion import mac as macmod
from lossy_diffusion.config import ConfigError, Scenario, parse_scenario
from lossy_diffusion.errors import uniform_error_model
from lossy_diffusion.montecarlo import run_diffusion, steady_state_estimate
from lossy_diffusion.results import MsdReport, to_db, write_curve_csv, write_msd_csv
from lossy_diffusion.stability import stability_report
from lossy_diffusion.theory import (
    UnstableConfiguration,
    build_moment_system,
    profile_arrays,
    scalar_coefficients,
    steady_state_msd,
    transient_theory_curve,
    weight_moments,
)


def _fmt(x) -> str:
    return repr(float(x))


def moment_system(sc: Scenario, errmodel=None, rule=None):
    _, _, sv2 = profile_arrays(sc.profiles)
    coeffs = scalar_coefficients(sc.profiles, sc.corr, sc.w_o.m)
    moments = weight_moments(
        rule or sc.rule, sc.topology, errmodel or sc.errmodel, sv2,
        mode=sc.run.moments, samples=sc.run.moment_samples, seed=sc.run.seed,
    )
    return build_moment_system(coeffs, moments)


def theory_report(sc: Scenario, errmodel=None, rule=None) -> MsdReport:
    return steady_state_msd(moment_system(sc, errmodel, rule), sc.w_o)


def write_profiles(sc: Scenario) -> None:
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    with open(sc.out_dir / "profiles.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "degree", "mu", "sigma_u2", "sigma_v2"])
        for k, (d, p) in enumerate(zip(sc.topology.degrees, sc.profiles), 1):
            w.writerow([k, int(d), _fmt(p.mu), _fmt(p.sigma_u2), _fmt(p.sigma_v2)])
    if sc.topology.positions is not None:
        from lossy_diffusion.topology import write_positions

        write_positions(sc.topology, sc.out_dir / "positions.csv")


def cmd_theory(sc: Scenario) -> MsdReport | None:
    write_profiles(sc)
    system = moment_system(sc)
    rep = stability_report(sc.profiles, sc.w_o.m, system=system)
    print(rep.summary())
    try:
        msd = steady_state_msd(system, sc.w_o)
    except UnstableConfiguration as exc:
        print(f"theory: {exc}")
        return None
    write_msd_csv(sc.out_dir / "msd_theory.csv", msd.local)
    print("node  msd_theory_db")
    for k, v in enumerate(msd.local_db, 1):
        print(f"{k:4d}  {v:10.4f}")
    print(f"global {msd.global_db:10.4f}")
    if sc.run.transient_iters > 0:
        curve = transient_theory_curve(system, sc.w_o, sc.run.transient_iters)
        write_curve_csv(sc.out_dir / "curve_theory.csv", curve, sc.run.curve_stride)
    return msd


def cmd_simulate(sc: Scenario):
    write_profiles(sc)
    curve = run_diffusion(sc.topology, sc.profiles, sc.corr, sc.w_o, sc.rule, sc.errmodel,
                          sc.run.iters, sc.run.runs, sc.run.seed)
    write_curve_csv(sc.out_dir / "curve_sim.csv", curve, sc.run.curve_stride)
    local, glob = steady_state_estimate(curve, sc.run.window)
    write_msd_csv(sc.out_dir / "msd_sim.csv", local)
    print(f"simulated {sc.run.runs} runs x {sc.run.iters} iterations; steady-state global MSD {to_db(glob):.4f} dB")
    return curve, local


def cmd_stability(sc: Scenario):
    write_profiles(sc)
    try:
        system = moment_system(sc)
    except ValueError as exc:
        print(f"moment system unavailable: {exc}")
        system = None
    rep = stability_report(sc.profiles, sc.w_o.m, system=system)
    rep.write_csv(sc.out_dir / "stability.csv")
    print(rep.summary())
    return rep


def cmd_mac_model(sc: Scenario):
    params = sc.mac or macmod.MacParams()
    res = macmod.mac_model(sc.topology, params, sc.mac_coupling)
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    with open(sc.out_dir / "mac_model.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "tau", "q", "p"])
        for k in range(sc.n):
            w.writerow([k + 1, _fmt(res.tau[k]), _fmt(res.q[k]), _fmt(res.p[k])])
    print(f"MAC model ({sc.mac_coupling} fixed point, CW={params.cw}, R={params.r}) written for {sc.n} nodes")
    return res


def cmd_mac_sim(sc: Scenario):
    params = sc.mac or macmod.MacParams()
    stats = macmod.simulate_backoff(sc.topology, params, sc.mac_slots, sc.run.seed)
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    with open(sc.out_dir / "mac_sim.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "q_hat", "p_hat"])
        for k in range(sc.n):
            w.writerow([k + 1, _fmt(stats.q_hat[k]), _fmt(stats.p_hat[k])])
    print(f"simulated {sc.mac_slots} slots (CW={params.cw}, R={params.r})")
    return stats


@dataclass
class Comparison:
    theory: np.ndarray | None  # linear, None when unstable
    sim: np.ndarray
    unstable: UnstableConfiguration | None

    @property
    def delta_db(self):
        if self.theory is None:
            return None
        return to_db(self.sim) - to_db(self.theory)


def cmd_compare(sc: Scenario) -> Comparison:
    write_profiles(sc)
    system = moment_system(sc)
    rep = stability_report(sc.profiles, sc.w_o.m, system=system)
    try:
        theory = steady_state_msd(system, sc.w_o).local
        unstable = None
    except UnstableConfiguration as exc:
        theory, unstable = None, exc
    curve = run_diffusion(sc.topology, sc.profiles, sc.corr, sc.w_o, sc.rule, sc.errmodel,
                          sc.run.iters, sc.run.runs, sc.run.seed)
    sim, _ = steady_state_estimate(curve, sc.run.window)
    cmp = Comparison(theory, sim, unstable)
    rows = []
    labels = [str(k) for k in range(1, sc.n + 1)] + ["global"]
    sim_all = np.append(sim, sim.mean())
    th_all = None if theory is None else np.append(theory, theory.mean())
    for i, lab in enumerate(labels):
        s_db = float(to_db(sim_all[i]))
        if th_all is None:
            rows.append([lab, "unstable", _fmt(s_db), "unavailable"])
        else:
            t_db = float(to_db(th_all[i]))
            rows.append([lab, _fmt(t_db), _fmt(s_db), _fmt(s_db - t_db)])
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    with open(sc.out_dir / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "msd_theory_db", "msd_sim_db", "delta_db"])
        w.writerows(rows)
    write_curve_csv(sc.out_dir / "curve_sim.csv", curve, sc.run.curve_stride)
    print(f"{'node':>6} {'theory_db':>12} {'sim_db':>12} {'delta_db':>10}")
    for lab, t, s, d in rows:
        t = f"{float(t):12.4f}" if t != "unstable" else f"{t:>12}"
        d = f"{float(d):10.4f}" if d != "unavailable" else f"{d:>10}"
        print(f"{lab:>6} {t} {float(s):12.4f} {d}")
    print(rep.summary())
    if unstable is not None:
        print(f"theory: {unstable}")
    return cmp


def parse_grid(text: str) -> np.ndarray:
    """``a:b:step`` inclusive of b (up to rounding), or a comma-separated list."""
    if ":" not in text:
        vals = [float(x) for x in text.split(",") if x.strip()]
    else:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be a:b:step, got {text!r}")
        a, b, step = (float(x) for x in parts)
        if step <= 0 or b < a:
            raise ValueError("grid needs step > 0 and b >= a")
        count = int(np.floor((b - a) / step + 1e-9)) + 1
        vals = list(np.round(a + step * np.arange(count), 12))
    grid = np.array(vals, dtype=float)
    if np.any((grid < 0) | (grid > 1)):
        raise ValueError("grid probabilities must lie in [0, 1]")
    return grid


@dataclass
class Sweep:
    grid: np.ndarray
    local: np.ndarray  # (len(grid), N) linear, NaN where unstable
    sim_local: np.ndarray | None = None

    @property
    def global_msd(self) -> np.ndarray:
        return self.local.mean(axis=1)

    @property
    def argmin(self) -> float:
        return float(self.grid[int(np.nanargmin(self.global_msd))])

    def node_argmin(self, k: int) -> float:
        return float(self.grid[int(np.nanargmin(self.local[:, k]))])


def _require_uniform(sc: Scenario) -> None:
    if sc.error_kind != "uniform":
        raise ConfigError(f"sweep/rank need a uniform error model, scenario has kind = {sc.error_kind!r}")


def sweep_theory(sc: Scenario, grid) -> Sweep:
    _require_uniform(sc)
    local = np.full((len(grid), sc.n), np.nan)
    for i, p in enumerate(grid):
        sub = sc.with_error(uniform_error_model(sc.topology, float(p)), float(p))
        try:
            local[i] = theory_report(sub, rule=sub.rule).local
        except UnstableConfiguration:
            pass
    return Sweep(np.asarray(grid, dtype=float), local)


def _write_sweep(path, grid, local) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "msd_global_db"] + [f"msd_node{k}_db" for k in range(1, local.shape[1] + 1)])
        for p, row in zip(grid, local):
            w.writerow([_fmt(p), _fmt(to_db(row.mean()))] + [_fmt(x) for x in to_db(row)])


def cmd_sweep(sc: Scenario, grid, simulate: bool = False) -> Sweep:
    write_profiles(sc)
    sw = sweep_theory(sc, grid)
    _write_sweep(sc.out_dir / "sweep.csv", sw.grid, sw.local)
    if simulate:
        sim = np.empty_like(sw.local)
        for i, p in enumerate(sw.grid):
            sub = sc.with_error(uniform_error_model(sc.topology, float(p)), float(p))
            curve = run_diffusion(sub.topology, sub.profiles, sub.corr, sub.w_o, sub.rule, sub.errmodel,
                                  sub.run.iters, sub.run.runs, sub.run.seed)
            sim[i] = steady_state_estimate(curve, sub.run.window)[0]
        sw.sim_local = sim
        _write_sweep(sc.out_dir / "sweep_sim.csv", sw.grid, sim)
    print(f"global theory MSD minimized on the grid at p = {sw.argmin:g} ({to_db(np.nanmin(sw.global_msd)):.4f} dB)")
    return sw


def rank_nodes(local) -> list[int]:
    """0-based node order by ascending MSD, ties (to 10 significant digits) by index."""
    keys = [(float(f"{v:.10e}"), k) for k, v in enumerate(local)]
    return [k for _, k in sorted(keys)]


def cmd_rank(sc: Scenario, grid) -> dict[float, list[int]]:
    write_profiles(sc)
    sw = sweep_theory(sc, grid)
    out = {}
    with open(sc.out_dir / "rank.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "order"])
        for p, row in zip(sw.grid, sw.local):
            order = rank_nodes(row)
            out[float(p)] = order
            w.writerow([_fmt(p), " ".join(str(k + 1) for k in order)])
            print(f"p = {p:<6g} " + " ".join(str(k + 1) for k in order))
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lossy-diffusion", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, grid=False):
        p.add_argument("--config", required=True, type=Path, help="scenario TOML file")
        p.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
        p.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        if grid:
            p.add_argument("--grid", default="0:1:0.02", help="failure probabilities a:b:step or p1,p2,...")

    for name, helptext in (
        ("theory", "steady-state MSD from the moment system"),
        ("simulate", "Monte Carlo learning curves"),
        ("stability", "step-size bounds and spectral radii"),
        ("compare", "theory vs simulation per node"),
    ):
        common(sub.add_parser(name, help=helptext))
    sw = sub.add_parser("sweep", help="theory MSD over a grid of uniform failure probabilities")
    common(sw, grid=True)
    sw.add_argument("--simulate", action="store_true", help="also simulate every grid point")
    common(sub.add_parser("rank", help="node ordering by local MSD for each p"), grid=True)
    mac = sub.add_parser("mac", help="MAC-layer loss model and simulation")
    macsub = mac.add_subparsers(dest="mac_command", required=True)
    common(macsub.add_parser("model", help="fixed-point loss probabilities"))
    common(macsub.add_parser("sim", help="slotted backoff simulation"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = parse_scenario(args.config, args.seed, args.out)
        if args.command == "theory":
            cmd_theory(sc)
        elif args.command == "simulate":
            cmd_simulate(sc)
        elif args.command == "stability":
            cmd_stability(sc)
        elif args.command == "compare":
            cmd_compare(sc)
        elif args.command == "sweep":
            cmd_sweep(sc, parse_grid(args.grid), args.simulate)
        elif args.command == "rank":
            cmd_rank(sc, parse_grid(args.grid))
        elif args.command == "mac":
            (cmd_mac_model if args.mac_command == "model" else cmd_mac_sim)(sc)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
