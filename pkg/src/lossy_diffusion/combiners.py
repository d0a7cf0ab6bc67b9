"""Combining rules over a realized success set.

Every rule is expressed as a nonnegative base matrix ``B`` supported on the
closed neighborhoods; the weights actually used at node k are ``B[k]``
restricted to S_k and renormalized to sum to one. For the score-type rules
(uniform, relative degree, relative variance, enhanced relative degree) this
is exactly ``score_l / sum_{m in S_k} score_m``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lossy_diffusion.topology import Topology

RULES = (
    "uniform",
    "maximum_degree",
    "metropolis",
    "relative_degree",
    "relative_variance",
    "enhanced_relative_degree",
)


@dataclass(frozen=True)
class CombiningRule:
    variant: str
    q: tuple[float, ...] | None = None  # per-node average loss, enhanced rule only

    def __post_init__(self):
        if self.variant not in RULES:
            raise ValueError(f"unknown combining rule {self.variant!r}; choose from {', '.join(RULES)}")
        if self.variant == "enhanced_relative_degree":
            if self.q is None:
                raise ValueError("enhanced_relative_degree needs per-node loss probabilities q")
            q = tuple(float(x) for x in self.q)
            if any(not 0.0 <= x < 1.0 for x in q):
                raise ValueError("enhanced_relative_degree requires 0 <= q_k < 1")
            object.__setattr__(self, "q", q)


def effective_degrees(topo: Topology, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (topo.n,):
        raise ValueError(f"expected {topo.n} loss probabilities, got shape {q.shape}")
    if np.any((q < 0) | (q > 1)):
        raise ValueError("loss probabilities must lie in [0, 1]")
    return topo.degrees * (1.0 - q)


def base_matrix(rule: CombiningRule, topo: Topology, noise_vars=None) -> np.ndarray:
    """Unnormalized weights B[k, l] >= 0 for l in N_k, zero elsewhere."""
    n = topo.n
    closed = topo.closed_adjacency
    deg = topo.degrees.astype(float)
    v = rule.variant
    if v == "uniform":
        score = np.ones(n)
    elif v == "relative_degree":
        score = deg
    elif v == "enhanced_relative_degree":
        score = effective_degrees(topo, rule.q)
    elif v == "relative_variance":
        if noise_vars is None:
            raise ValueError("relative_variance needs the per-node noise variances")
        sv2 = np.asarray(noise_vars, dtype=float)
        if np.any(sv2 <= 0):
            k = int(np.flatnonzero(sv2 <= 0)[0])
            raise ValueError(f"relative_variance: noise variance of node {k} is {sv2[k]}, must be > 0")
        score = 1.0 / sv2
    elif v == "metropolis":
        b = np.where(closed, 1.0 / np.maximum(deg[:, None], deg[None, :]), 0.0)
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, 1.0 - b.sum(axis=1))
        return b
    else:  # maximum_degree
        b = np.where(closed, 1.0 / n, 0.0)
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, 1.0 - b.sum(axis=1))
        return b
    return np.where(closed, score[None, :], 0.0)


def restrict(base: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Rows of ``base`` restricted to ``mask`` and renormalized.

    Works on a single N x N mask or a stack of them (leading batch axes).
    """
    w = np.where(mask, base, 0.0)
    tot = w.sum(axis=-1, keepdims=True)
    if np.any(tot <= 0):
        raise ValueError("combining weights vanish on a success set")
    return w / tot


def weights(rule: CombiningRule, topo: Topology, noise_vars, k: int, S_k) -> np.ndarray:
    """Weight row a_{k,.} (length N) over the success set S_k."""
    members = sorted(int(l) for l in S_k)
    nbhd = topo.neighborhood(k)
    if k not in members:
        raise ValueError(f"success set of node {k} must contain {k}")
    if not set(members) <= nbhd:
        raise ValueError(f"success set {members} is not inside N_{k} = {sorted(nbhd)}")
    if rule.variant == "relative_variance" and noise_vars is not None:
        sv2 = np.asarray(noise_vars, dtype=float)
        zero = [l for l in members if sv2[l] <= 0]
        if zero:
            raise ValueError(f"relative_variance: zero noise variance at node {zero[0]} (division by zero)")
        nv = np.where(sv2 > 0, sv2, 1.0)  # nodes outside S_k do not matter
    else:
        nv = noise_vars
    row = base_matrix(rule, topo, nv)[k]
    mask = np.zeros(topo.n, dtype=bool)
    mask[members] = True
    w = np.where(mask, row, 0.0)
    if w.sum() <= 0:
        raise ValueError(f"all effective degrees vanish on the success set of node {k}")
    return w / w.sum()
