"""Capacity bounds, the virtual-channel heuristic, and Monte Carlo oracles.

All logarithms are natural.  Asymptotic regime boundaries are evaluated with
every hidden constant set to one, so the regimes and the middle-case value
are order-of-magnitude statements only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .torus import torus_distances

KAPPA_EPS = 1e-6


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class BoundParams:
    n_s: int
    p: int
    D: float
    T: float = 1.0
    W: float = 1.0
    delta: float = 1.0
    kappa: float = 3.0

    def __post_init__(self):
        for name in ("n_s", "p", "D", "T", "W", "delta", "kappa"):
            if getattr(self, name) <= 0:
                raise BoundError(f"{name} must be positive")
        if self.kappa <= 2:
            raise BoundError(f"kappa must exceed 2, got {self.kappa}")


@dataclass(frozen=True)
class OracleConfig:
    trials: int = 1000
    significance: float = 1e-3
    seed: int = 0


class RegimeKind(str, enum.Enum):
    ZERO = "ZERO"
    CONSTANT = "CONSTANT"
    SQRT = "SQRT"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    value: Optional[float]
    t1: float
    t2: float
    note: str = "order only: constants set to 1"

    def __str__(self):
        if self.kind is RegimeKind.SQRT:
            return f"SQRT({self.value:.4g})"
        return self.kind.value


def _log_factor(n_s: float, p: float) -> float:
    return math.log(p) * math.log(n_s * p)


def capacity_regime(params: BoundParams) -> Regime:
    """Which case of the delay-constrained upper bound applies."""
    if params.p <= 1:
        raise BoundError("unicast degenerate (p = 1 makes log p = 0); bound inapplicable")
    lf = _log_factor(params.n_s, params.p)
    t2 = params.n_s / lf ** 2
    t1 = t2 ** (1.0 / 3.0)
    if params.D < t1:
        return Regime(RegimeKind.ZERO, None, t1, t2)
    if params.D > t2:
        return Regime(RegimeKind.CONSTANT, None, t1, t2)
    return Regime(RegimeKind.SQRT, lf * math.sqrt(params.D / params.n_s), t1, t2)


def _free_ride_term(params: BoundParams) -> float:
    return 16.0 * params.kappa * params.W * params.T / params.delta ** 2 * params.p \
        * math.log(params.p) * math.log(params.n_s * params.p)


def lambda_ceiling_no_relay(params: BoundParams) -> float:
    """Bound on expected delivered bits when sources transmit straight to destinations."""
    target = params.W * params.T * math.sqrt(32.0 / params.delta ** 2) * math.sqrt(params.n_s * params.p)
    return 5.0 * params.kappa * math.log(params.n_s * params.p) * target + _free_ride_term(params)


def lambda_ceiling_relay(params: BoundParams) -> float:
    """Bound on expected delivered bits when relays deliver to destinations."""
    target = math.sqrt(32.0 / params.delta ** 2) * params.W * params.T * (params.p + 1) \
        * math.sqrt(params.n_s * params.D)
    return 5.0 * params.kappa * math.log(params.n_s * params.p) * target + _free_ride_term(params)


def disk_area(radius):
    """Area of a disk on the unit torus, clamped to 1 once it wraps onto itself."""
    r = np.asarray(radius, dtype=float)
    return np.where(r <= 0.5, np.pi * r * r, 1.0)


def channel_rates(L1, L2, n_s: int, p: int, D: float, W: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Relay-channel and receiving-channel rates of the virtual-channel heuristic.

    The broadcast time share ``1 / (pi L1^2 n_s)`` is a fraction of time and is
    clamped to 1, as is every disk area.
    """
    n = n_s * (p + 1)
    a1 = np.minimum(np.pi * np.asarray(L1, dtype=float) ** 2, 1.0)
    a2 = np.minimum(np.pi * np.asarray(L2, dtype=float) ** 2, 1.0)
    share = np.minimum(1.0, 1.0 / (a1 * n_s))
    # 1 - (1 - a2)^(D a1 n), computed stably
    copies = D * a1 * n
    with np.errstate(divide="ignore"):
        log_miss = copies * np.log1p(-np.minimum(a2, 1.0 - 1e-300))
    relay = -np.expm1(log_miss) * W * share
    receive = W / (n_s * p * a2) + W * (p - 1) / (n_s * p)
    return relay, receive


@dataclass(frozen=True)
class HeuristicResult:
    capacity: float
    L1: float
    L2: float
    grid: np.ndarray
    objective: np.ndarray

    def __iter__(self):
        return iter((self.capacity, self.L1, self.L2))


def heuristic_capacity(n_s: int, p: int, D: float, W: float = 1.0, points: int = 400,
                       lo: float = 1e-4, hi: float = 0.5) -> HeuristicResult:
    """Grid search of ``max_{L1, L2} min(relay, receive)`` on a log grid over ``(lo, hi]``."""
    grid = np.geomspace(lo, hi, points)
    relay, receive = channel_rates(grid[:, None], grid[None, :], n_s, p, D, W)
    objective = np.minimum(relay, receive)
    i, j = np.unravel_index(np.argmax(objective), objective.shape)
    return HeuristicResult(float(objective[i, j]), float(grid[i]), float(grid[j]), grid, objective)


def kappa_min(gamma: float, n_s: int, p: int) -> float:
    """Smallest cluster constant meeting the Chernoff conditions (and exceeding 2)."""
    if not 0 < gamma <= 1:
        raise BoundError(f"gamma must lie in (0, 1], got {gamma}")
    if n_s * p <= 3:
        raise BoundError("the cluster bound needs n_s * p > 3")
    mean = (p - 1) * math.pi * gamma ** 2
    needed = math.e ** 2 * mean / ((1 + p * gamma ** 2) * math.log(n_s * p))
    return max(2.0 + KAPPA_EPS, needed)


def cluster_threshold(gamma: float, kappa: float, n_s: int, p: int) -> float:
    return kappa * (1 + p * gamma ** 2) * math.log(n_s * p)


@dataclass(frozen=True)
class ClusterEstimate:
    mean_z: float           # estimate of E[Z] over T slots
    per_slot: float         # mean_z / T
    bound: float            # T / (n_s p)^2
    threshold: float
    mean_h: float           # empirical E[H(j, gamma, t)]
    expected_h: float       # (p - 1) * area(gamma)
    exceedances: int
    samples: int            # destination-slot samples

    @property
    def within_bound(self) -> bool:
        return self.mean_z <= self.bound


def neighbour_counts(pos: np.ndarray, gamma: float) -> np.ndarray:
    """For ``(G, p, 2)`` positions, how many group-mates lie within ``gamma`` of each point.

    Points come back sorted by x within each group.  Groups are swept in
    x order: the forward x-gap from a point grows with the offset, so a group
    drops out as soon as no point has a mate within ``gamma`` in x.
    """
    G, p, _ = pos.shape
    if gamma >= 0.5:
        # forward and backward x-gaps can both be <= gamma: fall back to all pairs
        d = torus_distances(pos[:, :, None, :], pos[:, None, :, :])
        return np.sort((d <= gamma).sum(axis=-1) - 1, axis=1)
    order = np.argsort(pos[:, :, 0], axis=1)
    pos = np.take_along_axis(pos, order[:, :, None], axis=1)
    x, y = pos[:, :, 0], pos[:, :, 1]
    h = np.zeros((G, p), dtype=np.int64)
    active = np.arange(G)
    idx = np.arange(p)
    g2 = gamma * gamma
    for k in range(1, p):
        xa, ya = x[active], y[active]
        j = (idx + k) % p
        dx = np.mod(xa[:, j] - xa, 1.0)
        close = dx <= gamma
        if not close.any():
            break
        dy = np.abs(ya[:, j] - ya)
        dy = np.minimum(dy, 1.0 - dy)
        gi, ii = np.nonzero(close & (dx * dx + dy * dy <= g2))
        np.add.at(h, (active[gi], ii), 1)
        np.add.at(h, (active[gi], j[ii]), 1)
        active = active[close.any(axis=1)]
    return h


def cluster_exceedance_mc(n_s: int, p: int, gamma: float, kappa: float, T: int,
                          oracle: OracleConfig = OracleConfig(), batch: int = 2_000_000) -> ClusterEstimate:
    """Monte Carlo estimate of the expected number of crowded destination-slots.

    Each slot places all destinations i.i.d. uniformly; ``H(j)`` counts the
    other destinations of ``j``'s session within ``gamma`` of ``j``.  Sources
    and other sessions do not affect ``H`` and are not drawn.
    """
    rng = np.random.default_rng(oracle.seed)
    thr = cluster_threshold(gamma, kappa, n_s, p)
    total = oracle.trials * T * n_s      # (slot, session) groups
    per_chunk = max(1, batch // p)
    exceed = 0
    h_sum = 0
    done = 0
    while done < total:
        m = min(per_chunk, total - done)
        h = neighbour_counts(rng.random((m, p, 2)), gamma)
        exceed += int(np.count_nonzero(h >= thr))
        h_sum += int(h.sum())
        done += m
    samples = total * p
    mean_z = exceed / oracle.trials
    return ClusterEstimate(
        mean_z=mean_z,
        per_slot=mean_z / T,
        bound=T / (n_s * p) ** 2,
        threshold=thr,
        mean_h=h_sum / samples,
        expected_h=float((p - 1) * disk_area(gamma)),
        exceedances=exceed,
        samples=samples,
    )


@dataclass(frozen=True)
class BallsBinsResult:
    expected: float
    mc_mean: float
    mc_std: float
    trials: int
    delta: float
    concentration_freq: float     # fraction of trials with N >= (1 - delta) E
    chernoff_floor: float         # 1 - 2 exp(-delta^2 E / 3)


def balls_bins_expectation(n_bins: int, m_per_round: int, rounds: int) -> float:
    return n_bins * (1.0 - (1.0 - m_per_round / n_bins) ** rounds)


def balls_bins_nonempty(n_bins: int, m_per_round: int, rounds: int, trials: int = 10_000,
                        delta: float = 0.1, seed: int = 0, chunk: int = 2_000_000) -> BallsBinsResult:
    """Non-empty bins when each round drops one ball into each of ``m`` distinct random bins."""
    if not 1 <= m_per_round <= n_bins:
        raise ValueError("need 1 <= m_per_round <= n_bins")
    rng = np.random.default_rng(seed)
    expected = balls_bins_expectation(n_bins, m_per_round, rounds)
    per = max(1, chunk // (rounds * n_bins))
    counts = []
    done = 0
    while done < trials:
        t = min(per, trials - done)
        keys = rng.random((t, rounds, n_bins))
        # m smallest keys per round = m distinct bins chosen uniformly
        chosen = np.argpartition(keys, m_per_round - 1, axis=2)[:, :, :m_per_round]
        hit = np.zeros((t, n_bins), dtype=bool)
        hit[np.arange(t)[:, None, None], chosen] = True
        counts.append(hit.sum(axis=1))
        done += t
    n = np.concatenate(counts)
    return BallsBinsResult(
        expected=expected,
        mc_mean=float(n.mean()),
        mc_std=float(n.std(ddof=1)) if trials > 1 else 0.0,
        trials=trials,
        delta=delta,
        concentration_freq=float(np.mean(n >= (1 - delta) * expected)),
        chernoff_floor=1.0 - 2.0 * math.exp(-delta ** 2 * expected / 3.0),
    )
