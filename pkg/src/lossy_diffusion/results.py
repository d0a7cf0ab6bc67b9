"""Result containers shared by the theory and simulation paths, plus CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


def to_db(x):
    return 10.0 * np.log10(x)


@dataclass
class MsdReport:
    local: np.ndarray  # linear, per node
    spectral_radius: float
    w_ss_norm: np.ndarray  # steady-state E[w_k^T w_k]

    @property
    def global_msd(self) -> float:
        return float(np.mean(self.local))

    @property
    def local_db(self) -> np.ndarray:
        return to_db(self.local)

    @property
    def global_db(self) -> float:
        return float(to_db(self.global_msd))


@dataclass
class LearningCurve:
    local: np.ndarray  # shape (iterations + 1, N), linear MSD; row 0 is the initial state
    runs: int = 0  # 0 marks a theoretical curve
    seed: int | None = None

    @property
    def iterations(self) -> int:
        return self.local.shape[0] - 1

    @property
    def global_msd(self) -> np.ndarray:
        return self.local.mean(axis=1)


def write_msd_csv(path, local, label_global="global") -> None:
    local = np.asarray(local, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "msd_linear", "msd_db"])
        for k, v in enumerate(local, 1):
            w.writerow([k, repr(float(v)), repr(float(to_db(v)))])
        g = float(local.mean())
        w.writerow([label_global, repr(g), repr(float(to_db(g)))])


def read_msd_csv(path) -> tuple[np.ndarray, float]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    local = np.array([float(r["msd_linear"]) for r in rows if r["node"] != "global"])
    glob = [float(r["msd_linear"]) for r in rows if r["node"] == "global"]
    return local, glob[0]


def write_curve_csv(path, curve: LearningCurve, stride: int = 1) -> None:
    n = curve.local.shape[1]
    db = to_db(curve.local)
    gdb = to_db(curve.global_msd)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "msd_global_db"] + [f"msd_node{k}_db" for k in range(1, n + 1)])
        for i in range(0, curve.iterations + 1, stride):
            w.writerow([i, repr(float(gdb[i]))] + [repr(float(x)) for x in db[i]])


def read_curve_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (iters, global_db, local_db)."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    return data[:, 0].astype(int), data[:, 1], data[:, 2:]
