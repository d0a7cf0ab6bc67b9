"""Scenario files.

A scenario is a TOML document with the sections below; every key is
optional unless noted, and any key not listed here is rejected::

    [topology]
    kind = "geometric"        # or "file"
    n = 7                     # geometric: node count (required)
    side = 100.0
    range = 50.0
    seed = 0
    file = "adjacency.txt"    # kind = "file": rows of 0/1

    [nodes]
    mu = 0.001                # scalar or per-node list
    sigma_u2 = 1.0            # scalar, per-node list, or "random"
    sigma_v2 = 1e-3           # scalar, per-node list, or "random"
    sigma_u2_range = [0.0, 1.0]    # used by "random" (lower end open)
    sigma_v2_range = [1e-6, 1e-2]
    sigma_v2_dist = "loguniform"   # or "uniform"
    seed = 0                  # seed of the random profiles

    [signal]
    m = 10                    # regressor length M
    rho = 0.0                 # spatial correlation index, rho_kl = rho^|k-l|
    w_o_file = "w.txt"        # whitespace-separated entries; default ones/sqrt(M)

    [error]
    kind = "uniform"          # "uniform", "csv" or "mac"
    p = 0.0                   # uniform failure probability
    file = "links.csv"        # csv: src,dst,p (1-based nodes)
    cw = 3                    # mac: initial contention window
    r = 1                     # mac: maximum retransmissions
    coupling = "node"         # mac: "node" or "network" fixed point
    slots = 100000            # mac sim: slots to simulate

    [combiner]
    rule = "relative_variance"
    q = "error_model"         # enhanced rule: per-node loss list or "error_model"

    [run]
    iters = 20000
    runs = 100
    window = 1000
    seed = 0
    moments = "exact"         # or "monte_carlo"
    moment_samples = 1000000
    transient_iters = 0       # >0: also emit the theoretical learning curve
    curve_stride = 1

    [output]
    dir = "out"

Relative paths are resolved against the scenario file's directory.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from lossy_diffusion.combiners import RULES, CombiningRule
from lossy_diffusion.errors import ErrorModel, read_error_csv, uniform_error_model
from lossy_diffusion.mac import MacParams, mac_error_model
from lossy_diffusion.theory import NodeProfile, SpatialCorrelation, TrueParameter
from lossy_diffusion.topology import Topology, random_geometric, read_adjacency

SCHEMA = {
    "topology": {"kind", "n", "side", "range", "seed", "file"},
    "nodes": {"mu", "sigma_u2", "sigma_v2", "sigma_u2_range", "sigma_v2_range", "sigma_v2_dist", "seed"},
    "signal": {"m", "rho", "w_o_file"},
    "error": {"kind", "p", "file", "cw", "r", "coupling", "slots"},
    "combiner": {"rule", "q"},
    "run": {"iters", "runs", "window", "seed", "moments", "moment_samples", "transient_iters", "curve_stride"},
    "output": {"dir"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunSpec:
    iters: int = 20000
    runs: int = 100
    window: int = 1000
    seed: int = 0
    moments: str = "exact"
    moment_samples: int = 10**6
    transient_iters: int = 0
    curve_stride: int = 1


@dataclass
class Scenario:
    topology: Topology
    profiles: list[NodeProfile]
    corr: SpatialCorrelation
    w_o: TrueParameter
    error_kind: str
    errmodel: ErrorModel
    rule: CombiningRule
    run: RunSpec
    out_dir: Path
    mac: MacParams | None = None
    mac_coupling: str = "node"
    mac_slots: int = 100000
    uniform_p: float | None = None
    enhanced_q: str | list | None = None
    source: Path | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.topology.n

    def with_error(self, errmodel: ErrorModel, p: float | None = None) -> "Scenario":
        """Copy with a different error model (the enhanced rule's q follows it)."""
        from dataclasses import replace

        sc = replace(self, errmodel=errmodel, uniform_p=p)
        sc.rule = _build_rule(sc, None)
        return sc


class _Lines:
    """Maps (section, key) to its line number for diagnostics."""

    def __init__(self, text: str, path):
        self.path = path
        self.where: dict[tuple[str, str], int] = {}
        section = ""
        for i, line in enumerate(text.splitlines(), 1):
            s = line.split("#", 1)[0].strip()
            mh = re.match(r"^\[\s*([A-Za-z0-9_]+)\s*\]$", s)
            if mh:
                section = mh.group(1)
                self.where[(section, "")] = i
                continue
            mk = re.match(r'^"?([A-Za-z0-9_]+)"?\s*=', s)
            if mk:
                self.where.setdefault((section, mk.group(1)), i)

    def err(self, section: str, key: str, msg: str) -> ConfigError:
        line = self.where.get((section, key)) or self.where.get((section, ""))
        loc = f"{self.path}:{line}" if line else f"{self.path}"
        name = f"{section}.{key}" if key else f"[{section}]"
        return ConfigError(f"{loc}: {name}: {msg}")


def _per_node(val, n, name, lines, section):
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise lines.err(section, name, f"expected a scalar or {n} values, got {arr.size}")
    return arr


def parse_scenario(path, seed_override: int | None = None, out_override=None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read scenario: {exc}") from None
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(raw, _Lines(text, path), path.parent, seed_override, out_override, path)


def scenario_from_dict(raw, lines=None, base=Path("."), seed_override=None, out_override=None, source=None) -> Scenario:
    lines = lines or _Lines("", "<config>")
    for sec, body in raw.items():
        if sec not in SCHEMA:
            raise lines.err(sec, "", f"unknown section (allowed: {', '.join(SCHEMA)})")
        if not isinstance(body, dict):
            raise lines.err(sec, "", "must be a table")
        for key in body:
            if key not in SCHEMA[sec]:
                raise lines.err(sec, key, f"unknown key (allowed: {', '.join(sorted(SCHEMA[sec]))})")

    def get(sec, key, default=None, typ=None):
        val = raw.get(sec, {}).get(key, default)
        if typ is not None and val is not None:
            try:
                if typ is int and (isinstance(val, bool) or int(val) != val):
                    raise TypeError
                val = typ(val)
            except (TypeError, ValueError):
                raise lines.err(sec, key, f"expected {typ.__name__}, got {val!r}") from None
        return val

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    notes = []
    # topology
    kind = get("topology", "kind", "geometric")
    if kind == "geometric":
        n = get("topology", "n", None, int)
        if n is None:
            raise lines.err("topology", "n", "required for a geometric topology")
        if n < 1:
            raise lines.err("topology", "n", "must be >= 1")
        side = get("topology", "side", 100.0, float)
        rng_ = get("topology", "range", 50.0, float)
        if side <= 0 or rng_ <= 0:
            raise lines.err("topology", "side" if side <= 0 else "range", "must be > 0")
        topo = random_geometric(n, side, rng_, get("topology", "seed", 0, int))
    elif kind == "file":
        f = get("topology", "file")
        if f is None:
            raise lines.err("topology", "file", "required when kind = \"file\"")
        if not resolve(f).exists():
            raise lines.err("topology", "file", f"file not found: {resolve(f)}")
        try:
            topo = read_adjacency(resolve(f))
        except ValueError as exc:
            raise lines.err("topology", "file", str(exc)) from None
    else:
        raise lines.err("topology", "kind", f"must be \"geometric\" or \"file\", got {kind!r}")
    n = topo.n

    # node profiles
    prof_rng = np.random.default_rng(get("nodes", "seed", 0, int))
    mu = _per_node(get("nodes", "mu", 0.01), n, "mu", lines, "nodes")
    if np.any(mu <= 0):
        raise lines.err("nodes", "mu", "step sizes must satisfy 0 < mu_k (lower end of the mean-stability bound 0 < mu_k < 2/sigma_u^2)")
    su2 = get("nodes", "sigma_u2", 1.0)
    if su2 == "random":
        lo, hi = get("nodes", "sigma_u2_range", [0.0, 1.0])
        su2 = hi - (hi - lo) * prof_rng.random(n)  # (lo, hi]
        notes.append("sigma_u2 drawn uniformly")
    su2 = _per_node(su2, n, "sigma_u2", lines, "nodes")
    if np.any(su2 <= 0):
        raise lines.err("nodes", "sigma_u2", "regressor variances must be > 0")
    sv2 = get("nodes", "sigma_v2", 1e-3)
    if sv2 == "random":
        lo, hi = get("nodes", "sigma_v2_range", [1e-6, 1e-2])
        dist = get("nodes", "sigma_v2_dist", "loguniform")
        if dist == "loguniform":
            sv2 = 10 ** prof_rng.uniform(np.log10(lo), np.log10(hi), n)
        elif dist == "uniform":
            sv2 = prof_rng.uniform(lo, hi, n)
        else:
            raise lines.err("nodes", "sigma_v2_dist", "must be \"loguniform\" or \"uniform\"")
        notes.append(f"sigma_v2 drawn {dist}")
    sv2 = _per_node(sv2, n, "sigma_v2", lines, "nodes")
    if np.any(sv2 < 0):
        raise lines.err("nodes", "sigma_v2", "noise variances must be >= 0")
    profiles = [NodeProfile(float(a), float(b), float(c)) for a, b, c in zip(mu, su2, sv2)]

    # signal model
    wf = get("signal", "w_o_file")
    if wf is not None:
        if not resolve(wf).exists():
            raise lines.err("signal", "w_o_file", f"file not found: {resolve(wf)}")
        w_o = TrueParameter(np.loadtxt(resolve(wf), ndmin=1))
        m = get("signal", "m", w_o.m, int)
        if m != w_o.m:
            raise lines.err("signal", "m", f"M = {m} but {wf} has {w_o.m} entries")
    else:
        m = get("signal", "m", 10, int)
        if m < 1:
            raise lines.err("signal", "m", "regressor length must be >= 1")
        w_o = TrueParameter.normalized_ones(m)
    rho = get("signal", "rho", 0.0, float)
    if not 0.0 <= rho < 1.0:
        raise lines.err("signal", "rho", "correlation index must lie in [0, 1)")
    corr = SpatialCorrelation.index(rho, n)

    # errors
    ekind = get("error", "kind", "uniform")
    mac = None
    uniform_p = None
    coupling = get("error", "coupling", "node")
    if coupling not in ("node", "network"):
        raise lines.err("error", "coupling", "must be \"node\" or \"network\"")
    slots = get("error", "slots", 100000, int)
    if ekind == "uniform":
        uniform_p = get("error", "p", 0.0, float)
        if not 0.0 <= uniform_p <= 1.0:
            raise lines.err("error", "p", "failure probability must lie in [0, 1]")
        errmodel = uniform_error_model(topo, uniform_p)
    elif ekind == "csv":
        f = get("error", "file")
        if f is None or not resolve(f).exists():
            raise lines.err("error", "file", "an existing src,dst,p CSV file is required for kind = \"csv\"")
        try:
            errmodel = read_error_csv(resolve(f), topo)
        except ValueError as exc:
            raise lines.err("error", "file", str(exc)) from None
    elif ekind == "mac":
        try:
            mac = MacParams(get("error", "cw", 3, int), get("error", "r", 1, int))
        except ValueError as exc:
            raise lines.err("error", "cw", str(exc)) from None
        errmodel = mac_error_model(topo, mac, coupling)
    else:
        raise lines.err("error", "kind", f"must be uniform, csv or mac, got {ekind!r}")
    if mac is None and ("cw" in raw.get("error", {}) or "r" in raw.get("error", {})):
        mac = MacParams(get("error", "cw", 3, int), get("error", "r", 1, int))

    rs = RunSpec()
    for key, typ in (("iters", int), ("runs", int), ("window", int), ("seed", int), ("moment_samples", int),
                     ("transient_iters", int), ("curve_stride", int)):
        val = get("run", key, getattr(rs, key), typ)
        if key != "seed" and key != "transient_iters" and val < 1:
            raise lines.err("run", key, "must be >= 1")
        setattr(rs, key, val)
    rs.moments = get("run", "moments", "exact")
    if rs.moments not in ("exact", "monte_carlo"):
        raise lines.err("run", "moments", "must be \"exact\" or \"monte_carlo\"")
    if rs.window > rs.iters:
        raise lines.err("run", "window", f"window {rs.window} exceeds iters {rs.iters}")
    if seed_override is not None:
        rs.seed = seed_override

    sc = Scenario(
        topology=topo, profiles=profiles, corr=corr, w_o=w_o, error_kind=ekind, errmodel=errmodel,
        rule=CombiningRule("uniform"), run=rs,
        out_dir=Path(out_override) if out_override is not None else resolve(get("output", "dir", "out")),
        mac=mac, mac_coupling=coupling, mac_slots=slots, uniform_p=uniform_p,
        enhanced_q=get("combiner", "q", "error_model"), source=source, notes=notes,
    )
    sc.rule = _build_rule(sc, lines, get("combiner", "rule", "relative_variance"))
    return sc


def _build_rule(sc: Scenario, lines, variant=None) -> CombiningRule:
    variant = variant or sc.rule.variant
    lines = lines or _Lines("", "<config>")
    if variant not in RULES:
        raise lines.err("combiner", "rule", f"unknown rule {variant!r}; choose from {', '.join(RULES)}")
    if variant == "relative_variance" and any(p.sigma_v2 <= 0 for p in sc.profiles):
        raise lines.err("combiner", "rule", "relative_variance needs every noise variance > 0")
    if variant != "enhanced_relative_degree":
        return CombiningRule(variant)
    q = sc.enhanced_q
    if isinstance(q, str):
        if q != "error_model":
            raise lines.err("combiner", "q", "must be a per-node list or \"error_model\"")
        q = sc.errmodel.average_loss(sc.topology)
    q = _per_node(q, sc.n, "q", lines, "combiner")
    if np.any((q < 0) | (q >= 1)):
        raise lines.err("combiner", "q", "enhanced rule needs 0 <= q_k < 1 at every node")
    return CombiningRule(variant, tuple(q))
