"""Mean and mean-square analysis of diffusion LMS under random link failures.

The second-order state is the vector of cross moments E[w_k^T w_l] over all
unordered pairs, ordered as 11, 22, ..., NN, 12, 13, ..., 1N, 23, ..., (N-1)N.
It evolves as

    y_{i+1} = C' y_i + C_om (W E[w_i]) + nu ||w_o||^2 + c_v

and the steady-state local MSD is read off the one-node entries of the
solution of (I - C') y = c_v.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from lossy_diffusion.combiners import CombiningRule, base_matrix, restrict
from lossy_diffusion.errors import ErrorModel, sample_success_masks
from lossy_diffusion.results import LearningCurve, MsdReport
from lossy_diffusion.topology import Topology

ENUMERATION_CAP = 2**20
SINGULAR_COND = 1e12


class UnstableConfiguration(ArithmeticError):
    """The mean-square recursion does not converge (rho(C') >= 1 or I - C' singular)."""

    def __init__(self, spectral_radius: float, reason: str = ""):
        self.spectral_radius = float(spectral_radius)
        msg = f"mean-square unstable configuration: spectral radius of C' = {self.spectral_radius:.6g}"
        super().__init__(msg + (f" ({reason})" if reason else ""))


class EnumerationTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class NodeProfile:
    mu: float
    sigma_u2: float
    sigma_v2: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"step size must be > 0, got {self.mu}")
        if not self.sigma_u2 > 0:
            raise ValueError(f"regressor variance must be > 0, got {self.sigma_u2}")
        if not self.sigma_v2 >= 0:
            raise ValueError(f"noise variance must be >= 0, got {self.sigma_v2}")


def profile_arrays(profiles) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mu = np.array([p.mu for p in profiles], dtype=float)
    su2 = np.array([p.sigma_u2 for p in profiles], dtype=float)
    sv2 = np.array([p.sigma_v2 for p in profiles], dtype=float)
    return mu, su2, sv2


def make_profiles(mu, sigma_u2, sigma_v2) -> list[NodeProfile]:
    mu, su2, sv2 = np.broadcast_arrays(
        np.atleast_1d(np.asarray(mu, float)),
        np.atleast_1d(np.asarray(sigma_u2, float)),
        np.atleast_1d(np.asarray(sigma_v2, float)),
    )
    return [NodeProfile(float(a), float(b), float(c)) for a, b, c in zip(mu, su2, sv2)]


@dataclass(frozen=True)
class SpatialCorrelation:
    """Correlation indices rho_kl between the regressors of nodes k and l."""

    matrix: np.ndarray

    def __post_init__(self):
        r = np.array(self.matrix, dtype=float)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.allclose(r, r.T, atol=0):
            raise ValueError("correlation matrix must be symmetric")
        if not np.all(np.diag(r) == 1.0):
            raise ValueError("correlation matrix must have a unit diagonal")
        r.setflags(write=False)
        object.__setattr__(self, "matrix", r)

    @classmethod
    def index(cls, rho: float, n: int) -> "SpatialCorrelation":
        """rho_kl = rho^|k-l|, by node index, irrespective of links."""
        if not 0.0 <= rho < 1.0:
            raise ValueError(f"correlation index must lie in [0, 1), got {rho}")
        k = np.arange(n)
        return cls(rho ** np.abs(k[:, None] - k[None, :]))

    @classmethod
    def independent(cls, n: int) -> "SpatialCorrelation":
        return cls(np.eye(n))

    def covariance(self, sigma_u2) -> np.ndarray:
        """Per-dimension N x N covariance: sigma^2_{u_kl} = rho_kl sigma_k sigma_l."""
        s = np.sqrt(np.asarray(sigma_u2, dtype=float))
        return self.matrix * np.outer(s, s)

    def permuted(self, perm) -> "SpatialCorrelation":
        perm = np.asarray(perm)
        return SpatialCorrelation(self.matrix[np.ix_(perm, perm)])


@dataclass(frozen=True)
class TrueParameter:
    w_o: np.ndarray

    def __post_init__(self):
        w = np.array(self.w_o, dtype=float).ravel()
        if w.size < 1:
            raise ValueError("parameter vector must have M >= 1 entries")
        w.setflags(write=False)
        object.__setattr__(self, "w_o", w)

    @property
    def m(self) -> int:
        return self.w_o.size

    @property
    def norm2(self) -> float:
        return float(self.w_o @ self.w_o)

    @classmethod
    def normalized_ones(cls, m: int) -> "TrueParameter":
        return cls(np.ones(m) / np.sqrt(m))


@dataclass
class ScalarCoefficients:
    """Per-node and per-pair scalars of the moment recursions.

    ``eta`` and ``nu`` are N x N with eta_k / nu_k on the diagonal and
    eta_kl / nu_kl off it (the pair formula reduces to the single-node one
    when rho_kk = 1).
    """

    eta: np.ndarray
    nu: np.ndarray
    eps: np.ndarray  # mu_k sigma^2_{u_k}
    rho: np.ndarray  # 1 - eps
    cv: np.ndarray  # M mu_k^2 sigma^2_{u_k} sigma^2_{v_k}
    m: int

    @property
    def eta_k(self) -> np.ndarray:
        return np.diag(self.eta).copy()

    @property
    def nu_k(self) -> np.ndarray:
        return np.diag(self.nu).copy()


def scalar_coefficients(profiles, corr: SpatialCorrelation, m: int) -> ScalarCoefficients:
    if m < 1:
        raise ValueError("regressor length M must be >= 1")
    mu, su2, sv2 = profile_arrays(profiles)
    if corr.matrix.shape != (mu.size, mu.size):
        raise ValueError("correlation matrix size does not match the number of nodes")
    cross = corr.covariance(su2)
    eps = mu * su2
    nu = np.outer(mu, mu) * (np.outer(su2, su2) + (m + 1) * cross**2)
    eta = 1.0 - (eps[:, None] + eps[None, :]) + nu
    cv = m * mu**2 * su2 * sv2
    return ScalarCoefficients(eta=eta, nu=nu, eps=eps, rho=1.0 - eps, cv=cv, m=m)


@dataclass
class WeightMoments:
    """First and second moments of the random combining matrix.

    ``second[k, l, m, n] = E[a_{k,m} a_{l,n}]``. In Monte Carlo mode the
    ``*_se`` arrays carry standard errors of the estimates.
    """

    abar: np.ndarray
    second: np.ndarray
    mode: str = "exact"
    samples: int | None = None
    seed: int | None = None
    abar_se: np.ndarray | None = None
    second_se: np.ndarray | None = None


def _node_outcomes(base_row: np.ndarray, p_row: np.ndarray, k: int, in_nbrs: list[int]):
    """All success patterns of the in-links of k: (probabilities, weight rows)."""
    d = len(in_nbrs)
    if 2**d > ENUMERATION_CAP:
        raise EnumerationTooLarge(
            f"node {k} has {d} in-links: 2^{d} outcomes exceed the cap 2^20; "
            "enumeration too large, use monte_carlo mode"
        )
    n = base_row.size
    bits = ((np.arange(2**d)[:, None] >> np.arange(d)[None, :]) & 1).astype(bool)
    pf = p_row[in_nbrs]
    prob = np.prod(np.where(bits, 1.0 - pf, pf), axis=1)
    mask = np.zeros((2**d, n), dtype=bool)
    mask[:, k] = True
    mask[:, in_nbrs] = bits
    return prob, restrict(base_row, mask)


def weight_moments(
    rule: CombiningRule,
    topo: Topology,
    errmodel: ErrorModel,
    noise_vars=None,
    mode: str = "exact",
    samples: int = 10**6,
    seed: int = 0,
) -> WeightMoments:
    """Moments of the combining weights over the link-failure ensemble.

    Exact mode enumerates only the failures of the in-links of each node:
    a_{k,.} depends on S_k alone, and S_k, S_l (k != l) are driven by
    disjoint, independent links, so E[a_{k,m} a_{l,n}] = abar_km abar_ln.
    """
    errmodel.check(topo)
    base = base_matrix(rule, topo, noise_vars)
    n = topo.n
    if mode == "exact":
        abar = np.zeros((n, n))
        self_second = np.zeros((n, n, n))
        for k in range(n):
            prob, rows = _node_outcomes(base[k], errmodel.p[k], k, topo.in_neighbors(k))
            abar[k] = prob @ rows
            self_second[k] = rows.T @ (prob[:, None] * rows)
        second = np.einsum("km,ln->klmn", abar, abar)
        idx = np.arange(n)
        second[idx, idx] = self_second
        return WeightMoments(abar=abar, second=second, mode="exact")
    if mode != "monte_carlo":
        raise ValueError(f"unknown moment mode {mode!r}")
    return _mc_moments(base, topo, errmodel, samples, seed)


def _mc_moments(base, topo, errmodel, samples: int, seed: int, chunk: int = 20000) -> WeightMoments:
    rng = np.random.default_rng(seed)
    n = topo.n
    s1 = np.zeros((n, n))
    s1sq = np.zeros((n, n))
    s2 = np.zeros((n, n, n, n))
    s2sq = np.zeros((n, n, n, n))
    done = 0
    while done < samples:
        c = min(chunk, samples - done)
        a = restrict(base, sample_success_masks(errmodel, topo, rng, c))
        a2 = a * a
        s1 += a.sum(axis=0)
        s1sq += a2.sum(axis=0)
        s2 += np.einsum("skm,sln->klmn", a, a, optimize=True)
        s2sq += np.einsum("skm,sln->klmn", a2, a2, optimize=True)
        done += c
    abar = s1 / samples
    second = s2 / samples
    var1 = np.maximum(s1sq / samples - abar**2, 0.0)
    var2 = np.maximum(s2sq / samples - second**2, 0.0)
    return WeightMoments(
        abar=abar,
        second=second,
        mode="monte_carlo",
        samples=samples,
        seed=seed,
        abar_se=np.sqrt(var1 / samples),
        second_se=np.sqrt(var2 / samples),
    )


def pair_list(n: int) -> list[tuple[int, int]]:
    return [(k, k) for k in range(n)] + [(k, l) for k in range(n) for l in range(k + 1, n)]


@dataclass
class MomentSystem:
    pairs: list[tuple[int, int]]
    cprime: np.ndarray  # Q x Q
    c_om: np.ndarray  # Q x N, coefficient of w_o^T E[w_m]
    nu: np.ndarray  # Q, coefficient of ||w_o||^2
    cv: np.ndarray  # Q, noise drive (nonzero on one-node rows only)
    eta_prime: np.ndarray  # Q, common row factor
    coeffs: ScalarCoefficients = field(repr=False)
    moments: WeightMoments = field(repr=False)

    @property
    def q(self) -> int:
        return len(self.pairs)

    @property
    def n(self) -> int:
        return self.coeffs.eps.size

    def index(self, k: int, l: int) -> int:
        k, l = min(k, l), max(k, l)
        if k == l:
            return k
        n = self.n
        return n + k * n - k * (k + 1) // 2 + (l - k - 1)

    def mean_matrix(self) -> np.ndarray:
        """E' = [rho_k abar_kl], the mean-recursion matrix."""
        return self.coeffs.rho[:, None] * self.moments.abar

    def dump(self, path) -> None:
        header = "C' rows/cols ordered " + " ".join(f"{k + 1}{l + 1}" for k, l in self.pairs)
        np.savetxt(path, self.cprime, header=header)


def build_moment_system(coeffs: ScalarCoefficients, moments: WeightMoments) -> MomentSystem:
    n = coeffs.eps.size
    pairs = pair_list(n)
    p1 = np.array([k for k, _ in pairs])
    p2 = np.array([l for _, l in pairs])
    t = moments.second
    # unordered (m, n), m != n, collects both orderings of the product
    tsym = t + t.transpose(0, 1, 3, 2)
    g = tsym[p1[:, None], p2[:, None], p1[None, :], p2[None, :]]
    g[:, :n] = t[p1[:, None], p2[:, None], p1[None, :n], p1[None, :n]]
    eta_prime = coeffs.eta[p1, p2]
    cprime = eta_prime[:, None] * g
    abar = moments.abar
    nu = coeffs.nu[p1, p2]
    c_om = abar[p1] * (coeffs.eps[p2] - nu)[:, None] + abar[p2] * (coeffs.eps[p1] - nu)[:, None]
    cv = np.zeros(len(pairs))
    cv[:n] = coeffs.cv
    return MomentSystem(
        pairs=pairs, cprime=cprime, c_om=c_om, nu=nu, cv=cv, eta_prime=eta_prime,
        coeffs=coeffs, moments=moments,
    )


def spectral_radius(mat: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(mat)))) if mat.size else 0.0


def steady_state_msd(system: MomentSystem, w_o: TrueParameter) -> MsdReport:
    radius = spectral_radius(system.cprime)
    if radius >= 1.0:
        raise UnstableConfiguration(radius)
    lhs = np.eye(system.q) - system.cprime
    if np.linalg.cond(lhs) > SINGULAR_COND:
        raise UnstableConfiguration(radius, "I - C' is numerically singular")
    mean_sys = np.eye(system.n) - system.mean_matrix()
    if np.linalg.svd(mean_sys, compute_uv=False).min() < 1e-12:
        warnings.warn("mean system I - E' is nearly singular; the w_o reduction may not hold", RuntimeWarning)
    y = np.linalg.solve(lhs, system.cv)
    local = y[: system.n].copy()
    return MsdReport(local=local, spectral_radius=radius, w_ss_norm=w_o.norm2 + local)


def mean_trajectory(abar, coeffs: ScalarCoefficients, w_o: TrueParameter, iters: int, init=None) -> np.ndarray:
    """E[w_{k,i}] for i = 0..iters; shape (iters + 1, N, M)."""
    if iters < 0:
        raise ValueError("iters must be >= 0")
    n = coeffs.eps.size
    e_mat = coeffs.rho[:, None] * np.asarray(abar)
    drive = coeffs.eps[:, None] * w_o.w_o[None, :]
    out = np.empty((iters + 1, n, w_o.m))
    out[0] = np.zeros((n, w_o.m)) if init is None else np.asarray(init, dtype=float)
    for i in range(iters):
        out[i + 1] = e_mat @ out[i] + drive
    return out


def transient_theory_curve(system: MomentSystem, w_o: TrueParameter, iters: int, init=None) -> LearningCurve:
    """Theoretical MSD_k(i) = E[w_k^T w_k] - 2 w_o^T E[w_k] + ||w_o||^2 for i = 0..iters."""
    n = system.n
    means = mean_trajectory(system.moments.abar, system.coeffs, w_o, iters, init)
    p1 = np.array([k for k, _ in system.pairs])
    p2 = np.array([l for _, l in system.pairs])
    w0 = means[0]
    y = np.einsum("qm,qm->q", w0[p1], w0[p2])
    const = system.nu * w_o.norm2 + system.cv
    wo2 = w_o.norm2
    local = np.empty((iters + 1, n))
    for i in range(iters + 1):
        proj = means[i] @ w_o.w_o
        local[i] = y[:n] - 2.0 * proj + wo2
        if i < iters:
            y = system.cprime @ y + system.c_om @ proj + const
    return LearningCurve(local=local, runs=0)


def theory_msd(topo, profiles, corr, w_o, rule, errmodel, mode="exact", samples=10**6, seed=0) -> MsdReport:
    """Convenience pipeline: coefficients -> moments -> system -> steady state."""
    _, _, sv2 = profile_arrays(profiles)
    coeffs = scalar_coefficients(profiles, corr, w_o.m)
    moments = weight_moments(rule, topo, errmodel, sv2, mode=mode, samples=samples, seed=seed)
    return steady_state_msd(build_moment_system(coeffs, moments), w_o)


def standalone_msd(profiles, m: int) -> np.ndarray:
    """Non-cooperative LMS steady state M mu sigma_v^2 / (2 - mu (M+2) sigma_u^2)."""
    mu, su2, sv2 = profile_arrays(profiles)
    return m * mu * sv2 / (2.0 - mu * (m + 2) * su2)
