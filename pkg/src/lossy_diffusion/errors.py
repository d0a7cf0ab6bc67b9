"""Per-directed-link failure probabilities and success-set sampling.

``p[k, l]`` is the probability that the estimate sent by l is *not* received
by k in a given iteration. Each directed link fails independently of every
other link and of every other iteration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from lossy_diffusion.topology import Topology


@dataclass(frozen=True)
class ErrorModel:
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"failure matrix must be square, got {p.shape}")
        if np.any(np.diag(p) != 0):
            raise ValueError("self-links never fail: diagonal of p must be 0")
        bad = np.argwhere((p < 0) | (p > 1) | ~np.isfinite(p))
        if bad.size:
            k, l = bad[0]
            raise ValueError(f"failure probability p[{k},{l}] = {p[k, l]} outside [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def check(self, topo: Topology) -> None:
        if self.n != topo.n:
            raise ValueError(f"error model has {self.n} nodes, topology has {topo.n}")
        off = np.argwhere((self.p != 0) & (topo.adjacency == 0) & ~np.eye(self.n, dtype=bool))
        if off.size:
            k, l = off[0]
            raise ValueError(f"failure probability given for non-link {l}->{k}")

    def is_uniform(self, topo: Topology) -> float | None:
        """The common p if every directed link shares one value, else None."""
        vals = self.p[topo.adjacency.astype(bool)]
        if vals.size == 0:
            return 0.0
        return float(vals[0]) if np.all(vals == vals[0]) else None

    def average_loss(self, topo: Topology) -> np.ndarray:
        """Mean in-link failure probability per node (0 for isolated nodes)."""
        adj = topo.adjacency.astype(bool)
        cnt = adj.sum(axis=1)
        tot = np.where(adj, self.p, 0.0).sum(axis=1)
        return np.divide(tot, cnt, out=np.zeros(self.n), where=cnt > 0)


def uniform_error_model(topo: Topology, p: float) -> ErrorModel:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"failure probability {p} outside [0, 1]")
    return ErrorModel(p * topo.adjacency.astype(float))


def per_node_error_model(topo: Topology, p_node) -> ErrorModel:
    """Every in-link of node k fails with probability p_node[k]."""
    p_node = np.asarray(p_node, dtype=float)
    if p_node.shape != (topo.n,):
        raise ValueError(f"expected {topo.n} per-node probabilities, got {p_node.shape}")
    return ErrorModel(p_node[:, None] * topo.adjacency)


def read_error_csv(path, topo: Topology) -> ErrorModel:
    """CSV with header ``src,dst,p`` and 1-based node labels; unlisted links get p=0."""
    p = np.zeros((topo.n, topo.n))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["src", "dst", "p"]:
            raise ValueError(f"{path}: header must be src,dst,p")
        for lineno, row in enumerate(reader, 2):
            try:
                src, dst, val = int(row["src"]) - 1, int(row["dst"]) - 1, float(row["p"])
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{lineno}: malformed row {row}") from None
            if not (0 <= src < topo.n and 0 <= dst < topo.n) or not topo.adjacency[dst, src]:
                raise ValueError(f"{path}:{lineno}: {src + 1}->{dst + 1} is not a link")
            p[dst, src] = val
    return ErrorModel(p)


def write_error_csv(model: ErrorModel, topo: Topology, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst", "p"])
        for k in range(topo.n):
            for l in topo.in_neighbors(k):
                w.writerow([l + 1, k + 1, repr(float(model.p[k, l]))])


def sample_success_sets(model: ErrorModel, topo: Topology, rng: np.random.Generator) -> np.ndarray:
    """One realization of all success sets.

    Returns a boolean N x N matrix ``s`` with ``s[k, l]`` true iff l is in
    S_k. The diagonal is always true; non-links are always false.
    """
    return sample_success_masks(model, topo, rng, None)


def sample_success_masks(model: ErrorModel, topo: Topology, rng: np.random.Generator, size) -> np.ndarray:
    """Batched version of :func:`sample_success_sets`; leading shape ``size``."""
    shape = (topo.n, topo.n) if size is None else (*np.atleast_1d(size), topo.n, topo.n)
    u = rng.random(shape)
    ok = (u >= model.p) & topo.adjacency.astype(bool)
    idx = np.arange(topo.n)
    ok[..., idx, idx] = True
    return ok


def success_sets_as_lists(mask: np.ndarray) -> list[list[int]]:
    return [list(np.flatnonzero(row)) for row in mask]
