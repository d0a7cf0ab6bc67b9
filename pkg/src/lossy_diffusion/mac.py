"""MAC-level loss model: per-node saturation fixed point and a slotted backoff simulator.

A transmission l -> k fails when any other member of k's closed
neighborhood (k included) transmits in the same slot, so node k sees
``contenders = |N_k| - 1`` potential interferers per incoming packet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lossy_diffusion.errors import ErrorModel, per_node_error_model
from lossy_diffusion.topology import Topology

BISECTION_TOL = 1e-12


@dataclass(frozen=True)
class MacParams:
    cw: int = 3  # initial contention window, slots
    r: int = 1  # maximum number of retransmissions

    def __post_init__(self):
        if int(self.cw) != self.cw or self.cw < 1:
            raise ValueError(f"contention window must be an integer >= 1, got {self.cw}")
        if int(self.r) != self.r or self.r < 0:
            raise ValueError(f"maximum retransmissions must be an integer >= 0, got {self.r}")

    @property
    def cw_max(self) -> int:
        return 2**self.r * self.cw


@dataclass
class MacResult:
    """Per-node transmission, collision and loss probabilities.

    ``q`` and ``p`` are receiver-side: they describe packets addressed to the
    node. ``q_link[k, l]`` is the collision probability of an attempt l -> k.
    """

    tau: np.ndarray
    q: np.ndarray
    p: np.ndarray
    q_link: np.ndarray | None = None


def transmission_probability(q, params: MacParams):
    """Saturated transmission probability for collision probability q.

    Uses 2 / ((CW+1) + q CW sum_{i<R} (2q)^i), which equals the usual
    2(1-2q) / ((1-2q)(CW+1) + q CW (1-(2q)^R)) with the removable singularity
    at q = 1/2 cancelled.
    """
    q = np.asarray(q, dtype=float)
    geom = sum((2.0 * q) ** i for i in range(params.r)) if params.r else 0.0
    return 2.0 / ((params.cw + 1) + q * params.cw * geom)


def bianchi_fixed_point(params: MacParams, contenders: int) -> tuple[float, float, float]:
    """Solve q = 1 - (1 - tau(q))^contenders; returns (tau, q, p = q^(R+1)).

    The right-hand side is nonincreasing in q, so the residual is increasing
    and bisection on [0, 1] brackets the unique root.
    """
    if contenders < 0:
        raise ValueError("number of contenders must be >= 0")
    if contenders == 0:
        tau = float(transmission_probability(0.0, params))
        return tau, 0.0, 0.0

    def resid(q):
        return q - (1.0 - (1.0 - transmission_probability(q, params)) ** contenders)

    lo, hi = 0.0, 1.0
    assert resid(lo) <= 0.0 <= resid(hi), "no root bracketed"
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if resid(mid) > 0:
            hi = mid
        else:
            lo = mid
    q = 0.5 * (lo + hi)
    tau = float(transmission_probability(q, params))
    return tau, q, q ** (params.r + 1)


def contenders(topo: Topology) -> np.ndarray:
    """Interferers per incoming packet: the rest of N_k, k included, minus the sender."""
    return topo.degrees - 1


def _link_collisions(topo: Topology, tau: np.ndarray) -> np.ndarray:
    """q_link[k, l] = 1 - prod_{j in N_k, j != l} (1 - tau_j), on links only."""
    closed = topo.closed_adjacency
    log_idle = np.log1p(-np.minimum(tau, 1.0 - 1e-15))
    tot = closed.astype(float) @ log_idle
    q = -np.expm1(tot[:, None] - log_idle[None, :])
    return np.where(topo.adjacency.astype(bool), q, 0.0)


def _attempt_shares(topo: Topology, q_link: np.ndarray, r: int):
    """Expected attempts per packet on each link and each sender's packet rate per attempt."""
    adj = topo.adjacency.astype(bool)
    per_packet = np.where(adj, sum(q_link**i for i in range(r + 1)), 0.0)
    tot = per_packet.sum(axis=0)  # over destinations of sender l
    return per_packet, np.divide(1.0, tot, out=np.zeros_like(tot), where=tot > 0)


def _network_fixed_point(topo: Topology, params: MacParams, tol=1e-13, max_iter=100000):
    n = topo.n
    adj = topo.adjacency.astype(bool)
    has_nbrs = adj.any(axis=1)
    tau = np.array([bianchi_fixed_point(params, int(c))[0] for c in contenders(topo)])
    for _ in range(max_iter):
        q_link = _link_collisions(topo, tau)
        per_packet, _ = _attempt_shares(topo, q_link, params.r)
        att = per_packet.sum(axis=0)
        gamma = np.divide((per_packet * q_link).sum(axis=0), att, out=np.zeros(n), where=att > 0)
        new = np.where(has_nbrs, transmission_probability(gamma, params), 0.0)
        if np.max(np.abs(new - tau)) < tol:
            tau = new
            break
        tau = 0.5 * (tau + new)
    else:
        raise RuntimeError("network MAC fixed point did not converge")
    return tau, _link_collisions(topo, tau)


def mac_model(topo: Topology, params: MacParams, coupling: str = "node") -> MacResult:
    """Per-node MAC loss probabilities.

    ``coupling="node"`` solves one scalar fixed point per node with its own
    contender count (every contender assumed to share the node's tau).
    ``coupling="network"`` solves all nodes jointly: each sender's tau follows
    from the collision rate of its own attempts, and each link's collision
    probability uses the actual tau of the other members of N_k.
    """
    if coupling == "node":
        sols = [bianchi_fixed_point(params, int(c)) for c in contenders(topo)]
        tau, q, p = (np.array(x, dtype=float) for x in zip(*sols))
        q_link = np.where(topo.adjacency.astype(bool), q[:, None], 0.0)
        return MacResult(tau=tau, q=q, p=p, q_link=q_link)
    if coupling != "network":
        raise ValueError(f"unknown coupling {coupling!r}")
    tau, q_link = _network_fixed_point(topo, params)
    per_packet, pkt_rate = _attempt_shares(topo, q_link, params.r)
    packets = np.where(topo.adjacency.astype(bool), (tau * pkt_rate)[None, :], 0.0)  # [k, l]
    attempts = packets * per_packet
    n = topo.n
    q = np.divide((attempts * q_link).sum(axis=1), attempts.sum(axis=1), out=np.zeros(n), where=attempts.sum(axis=1) > 0)
    p = np.divide(
        (packets * q_link ** (params.r + 1)).sum(axis=1), packets.sum(axis=1),
        out=np.zeros(n), where=packets.sum(axis=1) > 0,
    )
    return MacResult(tau=tau, q=q, p=p, q_link=q_link)


def mac_error_model(topo: Topology, params: MacParams, coupling: str = "node") -> ErrorModel:
    """Failure probability of link l -> k is its collision probability to the power R+1.

    With ``coupling="node"`` all in-links of k share q_k^(R+1).
    """
    res = mac_model(topo, params, coupling)
    if coupling == "node":
        return per_node_error_model(topo, res.p)
    return ErrorModel(res.q_link ** (params.r + 1))


@dataclass
class BackoffStats:
    attempts: np.ndarray  # attempts destined to each node
    collisions: np.ndarray
    packets: np.ndarray  # packets (finished) destined to each node
    discards: np.ndarray
    transmissions: np.ndarray  # attempts made by each node as sender
    slots: int

    @property
    def q_hat(self) -> np.ndarray:
        return np.divide(self.collisions, self.attempts, out=np.zeros(self.attempts.size), where=self.attempts > 0)

    @property
    def p_hat(self) -> np.ndarray:
        return np.divide(self.discards, self.packets, out=np.zeros(self.packets.size), where=self.packets > 0)

    @property
    def tau_hat(self) -> np.ndarray:
        return self.transmissions / self.slots


def simulate_backoff(
    topo: Topology, params: MacParams, slots: int, seed: int, reset_on_discard: bool = False
) -> BackoffStats:
    """Slotted, saturated exponential-backoff simulation.

    Every node with at least one neighbor always holds a packet, addressed to
    its neighbors in round-robin order. Backoff counters are uniform on
    [0, window - 1] and decrement every slot; a node transmits when its
    counter is zero. A failed attempt doubles the window (up to CW_max) and
    is retried; after R retransmissions the packet is discarded.

    The window returns to CW only after a success, as in the saturation
    Markov chain behind :func:`transmission_probability`; a discard leaves it
    at CW_max. Pass ``reset_on_discard=True`` to reset it after discards too.
    """
    if slots < 1:
        raise ValueError("slots must be >= 1")
    n = topo.n
    rng = np.random.default_rng(seed)
    closed = topo.closed_adjacency.astype(np.int64)
    nbrs = [topo.in_neighbors(k) for k in range(n)]
    active = np.array([len(x) > 0 for x in nbrs])
    ptr = np.zeros(n, dtype=np.int64)
    dest = np.array([x[0] if x else -1 for x in nbrs])
    stage = np.zeros(n, dtype=np.int64)  # backoff stage: window = CW 2^stage
    retries = np.zeros(n, dtype=np.int64)  # retransmissions of the current packet
    counter = np.where(active, rng.integers(0, params.cw, size=n), -1)

    attempts = np.zeros(n, dtype=np.int64)
    collisions = np.zeros(n, dtype=np.int64)
    packets = np.zeros(n, dtype=np.int64)
    discards = np.zeros(n, dtype=np.int64)
    sent = np.zeros(n, dtype=np.int64)

    for _ in range(slots):
        tx = counter == 0
        if not tx.any():
            counter[active] -= 1
            continue
        senders = np.flatnonzero(tx)
        d = dest[senders]
        busy = closed[d] @ tx.astype(np.int64) - 1  # other transmitters heard at the destination
        lost = busy > 0
        np.add.at(attempts, d, 1)
        np.add.at(collisions, d[lost], 1)
        sent[senders] += 1

        retry = senders[lost & (retries[senders] < params.r)]
        done_fail = senders[lost & (retries[senders] >= params.r)]
        done_ok = senders[~lost]
        np.add.at(discards, dest[done_fail], 1)
        finished = np.concatenate([done_ok, done_fail])
        np.add.at(packets, dest[finished], 1)

        retries[retry] += 1
        retries[finished] = 0
        stage[senders[lost]] = np.minimum(stage[senders[lost]] + 1, params.r)
        stage[done_ok] = 0
        if reset_on_discard:
            stage[done_fail] = 0
        for k in finished:
            ptr[k] = (ptr[k] + 1) % len(nbrs[k])
            dest[k] = nbrs[k][ptr[k]]

        counter[active & ~tx] -= 1
        windows = params.cw * 2 ** stage[senders]
        counter[senders] = rng.integers(0, windows)

    return BackoffStats(attempts, collisions, packets, discards, sent, slots)
