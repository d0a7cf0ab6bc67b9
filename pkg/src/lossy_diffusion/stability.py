"""Sufficient step-size conditions and exact spectral checks.

Neither bound involves the failure probabilities: both come from row-sum
(induced infinity-norm) arguments that hold for any row-stochastic expected
combining matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from lossy_diffusion.theory import MomentSystem, profile_arrays


@dataclass
class Bounds:
    lo: np.ndarray
    hi: np.ndarray
    ok: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, Bounds)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
            and np.array_equal(self.ok, other.ok)
        )


def mean_bounds(profiles) -> Bounds:
    """0 < mu_k < 2 / sigma^2_{u_k}."""
    mu, su2, _ = profile_arrays(profiles)
    hi = 2.0 / su2
    return Bounds(np.zeros_like(hi), hi, (mu > 0) & (mu < hi))


def meansquare_bounds(profiles, m: int) -> Bounds:
    """0 < mu_k < 2 / ((M + 2) sigma^2_{u_k})."""
    if m < 1:
        raise ValueError("M must be >= 1")
    mu, su2, _ = profile_arrays(profiles)
    hi = 2.0 / ((m + 2) * su2)
    return Bounds(np.zeros_like(hi), hi, (mu > 0) & (mu < hi))


def spectral_check(mat) -> tuple[float, bool]:
    """(spectral radius, radius < 1) via a full eigendecomposition."""
    if isinstance(mat, MomentSystem):
        mat = mat.cprime
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"spectral check needs a square matrix, got shape {a.shape}")
    r = float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0
    return r, r < 1.0


@dataclass
class StabilityReport:
    mean: Bounds
    meansquare: Bounds
    eta_ok: np.ndarray  # |eta_k| < 1 per node
    eta_pair_ok: np.ndarray  # |eta_kl| < 1, N x N
    rho_mean: float | None = None
    rho_cprime: float | None = None

    @property
    def sufficient_ok(self) -> bool:
        return bool(self.meansquare.ok.all())

    @property
    def spectrally_stable(self) -> bool | None:
        if self.rho_cprime is None:
            return None
        return self.rho_cprime < 1.0

    def summary(self) -> str:
        lines = [
            f"mean bound satisfied at {int(self.mean.ok.sum())}/{self.mean.ok.size} nodes",
            f"mean-square bound satisfied at {int(self.meansquare.ok.sum())}/{self.meansquare.ok.size} nodes",
            f"|eta_k| < 1 at all nodes: {bool(self.eta_ok.all())}; |eta_kl| < 1 for all pairs: {bool(self.eta_pair_ok.all())}",
        ]
        if self.rho_mean is not None:
            lines.append(f"spectral radius of E': {self.rho_mean:.8g} ({'stable' if self.rho_mean < 1 else 'unstable'})")
        if self.rho_cprime is not None:
            state = "stable" if self.rho_cprime < 1 else "unstable"
            lines.append(f"spectral radius of C': {self.rho_cprime:.8g} ({state} in mean square)")
            if state == "stable" and not self.sufficient_ok:
                lines.append("note: sufficient step-size condition violated, yet C' is spectrally stable")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "mean_lo", "mean_hi", "mean_ok", "ms_lo", "ms_hi", "ms_ok"])
            for k in range(self.mean.lo.size):
                w.writerow([
                    k + 1,
                    repr(float(self.mean.lo[k])), repr(float(self.mean.hi[k])), int(self.mean.ok[k]),
                    repr(float(self.meansquare.lo[k])), repr(float(self.meansquare.hi[k])), int(self.meansquare.ok[k]),
                ])


def stability_report(profiles, m: int, coeffs=None, system: MomentSystem | None = None) -> StabilityReport:
    if coeffs is None and system is not None:
        coeffs = system.coeffs
    if coeffs is not None:
        eta_ok = np.abs(np.diag(coeffs.eta)) < 1
        eta_pair_ok = np.abs(coeffs.eta) < 1
    else:
        n = len(profiles)
        eta_ok = np.ones(n, dtype=bool)
        eta_pair_ok = np.ones((n, n), dtype=bool)
    rep = StabilityReport(mean_bounds(profiles), meansquare_bounds(profiles, m), eta_ok, eta_pair_ok)
    if system is not None:
        rep.rho_mean = spectral_check(system.mean_matrix())[0]
        rep.rho_cprime = spectral_check(system.cprime)[0]
    return rep
