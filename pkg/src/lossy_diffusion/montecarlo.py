"""Monte Carlo simulation of combine-then-adapt diffusion LMS with link failures.

Runs are vectorized over a leading run axis but each run draws from its own
generators, derived from the master seed with ``SeedSequence.spawn``: run r
gets three independent streams (regressors, measurement noise, link
failures). A run's trajectory therefore depends only on (master seed, r),
never on how many runs are simulated alongside it.
"""

from __future__ import annotations

import numpy as np

from lossy_diffusion.combiners import CombiningRule, base_matrix, restrict
from lossy_diffusion.errors import ErrorModel
from lossy_diffusion.results import LearningCurve
from lossy_diffusion.theory import SpatialCorrelation, TrueParameter, profile_arrays
from lossy_diffusion.topology import Topology

CHUNK = 256


def regressor_factor(sigma_u2, corr: SpatialCorrelation) -> np.ndarray:
    """Symmetric square root of the per-dimension N x N regressor covariance."""
    cov = corr.covariance(sigma_u2)
    lam, vec = np.linalg.eigh(cov)
    if lam.min() < -1e-10 * max(lam.max(), 1.0):
        raise ValueError(f"regressor covariance is not positive semidefinite: smallest eigenvalue {lam.min():.3g}")
    return (vec * np.sqrt(np.clip(lam, 0.0, None))) @ vec.T


def sample_regressors(profiles, corr: SpatialCorrelation, m: int, rng: np.random.Generator) -> np.ndarray:
    """One iteration of regressors, shape (N, M).

    The M entries are independent draws of an N-variate Gaussian with the
    spatial covariance, so entry j of every node comes from the same draw.
    """
    _, su2, _ = profile_arrays(profiles)
    z = rng.standard_normal((m, su2.size))
    return (z @ regressor_factor(su2, corr)).T


def run_seeds(seed: int, runs: int) -> list[tuple[np.random.Generator, np.random.Generator, np.random.Generator]]:
    out = []
    for child in np.random.SeedSequence(seed).spawn(runs):
        su, sv, sl = child.spawn(3)
        out.append((np.random.default_rng(su), np.random.default_rng(sv), np.random.default_rng(sl)))
    return out


def run_diffusion(
    topo: Topology,
    profiles,
    corr: SpatialCorrelation,
    w_o: TrueParameter,
    rule: CombiningRule,
    errmodel: ErrorModel,
    iters: int,
    runs: int,
    seed: int = 0,
    track_mean: bool = False,
) -> LearningCurve:
    """Average learning curves over independent runs.

    ``local[i, k]`` is ||w_{k,i} - w_o||^2 averaged over runs, i = 0..iters,
    starting from zero weights. With ``track_mean`` the curve also carries
    ``mean_dev[i, k] = ||mean_r(w_{k,i}) - w_o||``.
    """
    if iters < 1 or runs < 1:
        raise ValueError("iters and runs must be >= 1")
    errmodel.check(topo)
    mu, su2, sv2 = profile_arrays(profiles)
    n, m = topo.n, w_o.m
    base = base_matrix(rule, topo, sv2)
    factor = regressor_factor(su2, corr)
    sv = np.sqrt(sv2)
    wo = w_o.w_o
    adj = topo.adjacency.astype(bool)
    diag = np.arange(n)
    gens = run_seeds(seed, runs)

    w = np.zeros((runs, n, m))
    local = np.empty((iters + 1, n))
    local[0] = wo @ wo
    mean_dev = np.empty((iters + 1, n)) if track_mean else None
    if track_mean:
        mean_dev[0] = np.linalg.norm(wo)

    i = 0
    while i < iters:
        c = min(CHUNK, iters - i)
        z = np.stack([g[0].standard_normal((c, m, n)) for g in gens], axis=1)  # (c, R, M, N)
        u = np.swapaxes(z @ factor, -1, -2)  # (c, R, N, M)
        v = np.stack([g[1].standard_normal((c, n)) for g in gens], axis=1) * sv  # (c, R, N)
        unif = np.stack([g[2].random((c, n, n)) for g in gens], axis=1)  # (c, R, N, N)
        ok = (unif >= errmodel.p) & adj
        ok[..., diag, diag] = True
        for t in range(c):
            a = restrict(base, ok[t])
            phi = a @ w
            ut = u[t]
            d = v[t] + ut @ wo
            e = d - np.einsum("rkm,rkm->rk", phi, ut)
            w = phi + (mu * e)[..., None] * ut
            dev = w - wo
            local[i + t + 1] = np.einsum("rkm,rkm->k", dev, dev) / runs
            if track_mean:
                mean_dev[i + t + 1] = np.linalg.norm(w.mean(axis=0) - wo, axis=-1)
        i += c

    curve = LearningCurve(local=local, runs=runs, seed=seed)
    if track_mean:
        curve.mean_dev = mean_dev
    return curve


def steady_state_estimate(curve: LearningCurve, window: int) -> tuple[np.ndarray, float]:
    """Per-node and global MSD averaged over the last ``window`` samples."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > curve.iterations:
        raise ValueError(f"window {window} exceeds the {curve.iterations} iterations of the curve")
    local = curve.local[-window:].mean(axis=0)
    return local, float(local.mean())
