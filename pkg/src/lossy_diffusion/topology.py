"""Network graphs: explicit adjacency or random geometric placement.

Node ids are 0-based throughout the Python API; files written for humans
(CSV reports) label nodes from 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Topology:
    """Undirected graph with closed neighborhoods.

    ``degrees[k]`` is the size of the *closed* neighborhood, i.e. node k
    itself is counted.
    """

    adjacency: np.ndarray
    positions: np.ndarray | None = None
    _neighbors: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=np.int8)
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        if self.positions is not None:
            pos = np.array(self.positions, dtype=float)
            pos.setflags(write=False)
            object.__setattr__(self, "positions", pos)
        nbrs = tuple(
            frozenset(int(l) for l in np.flatnonzero(adj[k])) | {k} for k in range(adj.shape[0])
        )
        object.__setattr__(self, "_neighbors", nbrs)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def links(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(a), int(b)) for a, b in zip(i, j)]

    @property
    def num_links(self) -> int:
        return int(self.adjacency.sum()) // 2

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int) + 1

    @property
    def closed_adjacency(self) -> np.ndarray:
        """Adjacency with ones on the diagonal (membership matrix of N_k)."""
        return self.adjacency.astype(bool) | np.eye(self.n, dtype=bool)

    def neighborhood(self, k: int) -> frozenset[int]:
        return neighborhood(self, k)

    def in_neighbors(self, k: int) -> list[int]:
        """Neighbors of k excluding k, sorted."""
        _check_node(self, k)
        return sorted(self._neighbors[k] - {k})

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            k = stack.pop()
            for l in self._neighbors[k]:
                if l not in seen:
                    seen.add(l)
                    stack.append(l)
        return len(seen) == self.n

    def permuted(self, perm) -> "Topology":
        """Relabel nodes so that new node i is old node perm[i]."""
        perm = np.asarray(perm)
        adj = self.adjacency[np.ix_(perm, perm)]
        pos = None if self.positions is None else self.positions[perm]
        return Topology(adj, pos)


def _check_node(topo: Topology, k) -> None:
    if not isinstance(k, (int, np.integer)) or not 0 <= k < topo.n:
        raise IndexError(f"invalid node id {k!r} for a {topo.n}-node topology")


def neighborhood(topo: Topology, k: int) -> frozenset[int]:
    """Closed neighborhood N_k (contains k)."""
    _check_node(topo, k)
    return topo._neighbors[k]


def build_from_adjacency(adj) -> Topology:
    a = np.asarray(adj)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    bad = np.argwhere((a != 0) & (a != 1))
    if bad.size:
        i, j = bad[0]
        raise ValueError(f"adjacency entry ({i},{j}) = {a[i, j].item()} is not binary (0/1)")
    diag = np.flatnonzero(np.diag(a))
    if diag.size:
        i = diag[0]
        raise ValueError(f"adjacency entry ({i},{i}) on the diagonal must be 0")
    asym = np.argwhere(a != a.T)
    if asym.size:
        i, j = asym[0]
        raise ValueError(f"adjacency not symmetric: entry ({i},{j}) = {a[i, j]} but ({j},{i}) = {a[j, i]}")
    return Topology(a)


def random_geometric(n: int, side: float, range_: float, seed: int) -> Topology:
    """Uniform placement on [0, side]^2; link iff distance < range_ (strict)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if side <= 0 or range_ <= 0:
        raise ValueError("side and range must be positive")
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0.0, side, size=(n, 2))
    return Topology(_geometric_adjacency(pos, range_), pos)


def _geometric_adjacency(pos: np.ndarray, range_: float) -> np.ndarray:
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    adj = (dist < range_).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return adj


def read_adjacency(path) -> Topology:
    """Rows of whitespace-separated 0/1 entries; blank lines and '#' comments skipped."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-integer entry in adjacency row") from None
    if any(len(r) != len(rows) for r in rows):
        raise ValueError(f"{path}: adjacency matrix is not square")
    return build_from_adjacency(np.array(rows, dtype=int).reshape(len(rows), len(rows)))


def write_positions(topo: Topology, path) -> None:
    if topo.positions is None:
        raise ValueError("topology has no positions")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y"])
        for k, (x, y) in enumerate(topo.positions, 1):
            w.writerow([k, repr(float(x)), repr(float(y))])


def star(n: int) -> Topology:
    adj = np.zeros((n, n), dtype=int)
    adj[0, 1:] = adj[1:, 0] = 1
    return build_from_adjacency(adj)


def ring(n: int) -> Topology:
    adj = np.zeros((n, n), dtype=int)
    for k in range(n):
        adj[k, (k + 1) % n] = adj[(k + 1) % n, k] = 1
    np.fill_diagonal(adj, 0)
    return build_from_adjacency(adj)


def complete(n: int) -> Topology:
    return build_from_adjacency(np.ones((n, n), dtype=int) - np.eye(n, dtype=int))
