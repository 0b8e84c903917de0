"""Protocol-model interference: cell coloring for spatial reuse and slot audits.

A transmission from ``i`` to ``j`` succeeds when ``j`` lies within ``i``'s
radius and every other concurrent sender ``k`` is at least
``(1 + delta) * radius_k`` away from ``j``.  The audit checks this on actual
node positions; the coloring is the schedule that is supposed to make it hold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .torus import CellGrid, Point, torus_distances

# slack for receivers sitting exactly on a cell corner (distance == radius)
RANGE_TOLERANCE = 1e-9


class GridTooCoarse(ValueError):
    """The cell grid cannot separate same-colored cells by the reuse distance."""


@dataclass(frozen=True)
class TransmissionIntent:
    sender: int
    radius: float
    receivers: tuple[int, ...]
    slot: int = 0

    def __post_init__(self):
        if not self.receivers:
            raise ValueError("a transmission needs at least one receiver")
        object.__setattr__(self, "receivers", tuple(int(r) for r in self.receivers))

    @property
    def target(self) -> int:
        return self.receivers[0]


@dataclass(frozen=True)
class Violation:
    slot: int
    sender: int
    receiver: int
    interferer: Optional[int]  # None: receiver out of the sender's range
    distance: float


@dataclass(frozen=True)
class Coloring:
    """Cell coloring with reuse distance ``k`` (in cells, per axis).

    Each axis is cut into ``g // k`` consecutive blocks of at least ``k``
    cells and a cell's axis color is its offset inside its block, so equal
    axis colors are at least ``k`` cells apart in both directions around the
    torus.  When ``k`` divides ``g`` this is the usual ``(i mod k, j mod k)``
    coloring with period ``k * k``.
    """

    grid: CellGrid
    k: int
    axis_color: np.ndarray

    @property
    def colors_per_axis(self) -> int:
        return int(self.axis_color.max()) + 1

    @property
    def period(self) -> int:
        return self.colors_per_axis ** 2

    def colors_of(self, cells: np.ndarray) -> np.ndarray:
        """Colors for an ``(n, 2)`` array of cell indices."""
        cells = np.asarray(cells)
        return self.axis_color[cells[..., 0]] * self.colors_per_axis + self.axis_color[cells[..., 1]]

    def phase(self, cell: tuple[int, int]) -> int:
        return int(self.colors_of(np.array(cell)))


def reuse_distance(g: int, radius: float, delta: float) -> int:
    return max(1, math.ceil(((2.0 + delta) * radius + 2.0 * math.sqrt(2.0) / g) * g))


def build_coloring(grid: CellGrid, radius: float, delta: float) -> Coloring:
    if not 0 < radius <= 0.5:
        raise ValueError(f"radius must lie in (0, 1/2], got {radius}")
    if delta <= 0:
        raise ValueError(f"guard delta must be positive, got {delta}")
    g = grid.g
    k = reuse_distance(g, radius, delta)
    if k > g:
        raise GridTooCoarse(f"grid too coarse for interference-free reuse: need {k} cells per axis, have {g}")
    blocks = g // k
    sizes = [g // blocks + (1 if b < g % blocks else 0) for b in range(blocks)]
    axis_color = np.concatenate([np.arange(s) for s in sizes])
    return Coloring(grid, k, axis_color)


def _position_array(positions, ids) -> np.ndarray:
    if isinstance(positions, np.ndarray):
        return positions[np.asarray(ids, dtype=np.int64)]
    out = []
    for i in ids:
        p = positions[i]
        out.append(p.as_array() if isinstance(p, Point) else np.asarray(p, dtype=float))
    return np.array(out, dtype=float).reshape(-1, 2)


def audit_slot(intents: Sequence[TransmissionIntent], positions: Mapping[int, Point] | np.ndarray,
               delta: float) -> list[Violation]:
    """Every protocol-model violation among transmissions sharing one slot."""
    violations = []
    if not intents:
        return violations
    senders = [t.sender for t in intents]
    sender_pos = _position_array(positions, senders)
    radii = np.array([t.radius for t in intents])
    for n, t in enumerate(intents):
        recv_pos = _position_array(positions, t.receivers)
        own = torus_distances(recv_pos, sender_pos[n])
        for r, d in zip(t.receivers, own):
            if d > t.radius + RANGE_TOLERANCE:
                violations.append(Violation(t.slot, t.sender, r, None, float(d)))
        # receivers x senders
        dist = torus_distances(recv_pos[:, None, :], sender_pos[None, :, :])
        bad = dist < (1.0 + delta) * radii[None, :]
        for a, b in zip(*np.nonzero(bad)):
            if senders[b] != t.sender:
                violations.append(Violation(t.slot, t.sender, t.receivers[a], senders[b], float(dist[a, b])))
    return violations


def exclusion_disjointness(intents: Sequence[TransmissionIntent], positions, delta: float) -> bool:
    """True iff the exclusion disks (radius ``delta * r / 2``) around targets are pairwise disjoint.

    Tangent disks count as disjoint, with the same rounding slack as the range check.
    """
    if len(intents) < 2:
        return True
    centers = _position_array(positions, [t.target for t in intents])
    half = delta * np.array([t.radius for t in intents]) / 2.0
    dist = torus_distances(centers[:, None, :], centers[None, :, :])
    overlap = dist < half[:, None] + half[None, :] - RANGE_TOLERANCE
    np.fill_diagonal(overlap, False)
    return not overlap.any()


@dataclass
class SlotTransmissions:
    """Array form of one slot's transmissions, used by the simulator.

    ``group`` labels transmissions that are on the air at the same time
    (same color and same sub-slot); receivers are listed flat with the
    index of the transmission they belong to.
    """

    slot: int
    sender: np.ndarray
    radius: np.ndarray
    group: np.ndarray
    receiver: np.ndarray
    owner: np.ndarray

    def intents(self) -> list[TransmissionIntent]:
        out = []
        for n in range(len(self.sender)):
            recv = self.receiver[self.owner == n]
            out.append(TransmissionIntent(int(self.sender[n]), float(self.radius[n]), tuple(recv), self.slot))
        return out


def group_pairs(left_keys: np.ndarray, right_keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All index pairs ``(a, b)`` with ``left_keys[a] == right_keys[b]``."""
    order = np.argsort(right_keys, kind="stable")
    sorted_keys = right_keys[order]
    lo = np.searchsorted(sorted_keys, left_keys, side="left")
    reps = np.searchsorted(sorted_keys, left_keys, side="right") - lo
    a = np.repeat(np.arange(len(left_keys)), reps)
    b = order[np.repeat(lo - (np.cumsum(reps) - reps), reps) + np.arange(len(a))]
    return a, b


def audit_arrays(tx: SlotTransmissions, positions: np.ndarray, delta: float) -> list[Violation]:
    """Vectorized :func:`audit_slot` over the concurrent groups of one slot.

    Receivers are only compared against concurrent senders that are close
    enough to their own sender to possibly reach them (triangle inequality);
    receivers found out of range are compared against every concurrent sender.
    """
    if len(tx.sender) == 0:
        return []
    violations = []
    spos = positions[tx.sender]
    rpos = positions[tx.receiver]
    own = torus_distances(rpos, spos[tx.owner])
    out = own > tx.radius[tx.owner] + RANGE_TOLERANCE
    for n in np.nonzero(out)[0]:
        violations.append(Violation(tx.slot, int(tx.sender[tx.owner[n]]), int(tx.receiver[n]), None, float(own[n])))

    a, b = group_pairs(tx.group, tx.group)
    keep = a != b
    a, b = a[keep], b[keep]
    near = torus_distances(spos[a], spos[b]) < (1.0 + delta) * tx.radius[b] + tx.radius[a] + RANGE_TOLERANCE
    a, b = a[near], b[near]
    # receivers of each close sender a, paired with interferer b
    pr, pb = group_pairs(tx.owner, a)
    ri, si = pr, b[pb]
    if out.any():
        oi = np.nonzero(out)[0]
        xr, xs = group_pairs(tx.group[tx.owner[oi]], tx.group)
        ri = np.concatenate([ri, oi[xr]])
        si = np.concatenate([si, xs])
        keep = si != tx.owner[ri]
        ri, si = ri[keep], si[keep]
        pairs = np.unique(np.column_stack([ri, si]), axis=0)
        ri, si = pairs[:, 0], pairs[:, 1]
    d = torus_distances(rpos[ri], spos[si])
    bad = d < (1.0 + delta) * tx.radius[si]
    for r, k, dist in zip(ri[bad], si[bad], d[bad]):
        violations.append(Violation(tx.slot, int(tx.sender[tx.owner[r]]), int(tx.receiver[r]),
                                    int(tx.sender[k]), float(dist)))
    return violations


@dataclass
class AuditLog:
    """Running audit totals for a simulation run."""

    delta: float
    slots: int = 0
    transmissions: int = 0
    clean_slots: int = 0
    keep_rows: bool = True

    def __post_init__(self):
        self.violations: list[Violation] = []

    def record(self, tx: SlotTransmissions, positions: np.ndarray) -> list[Violation]:
        found = audit_arrays(tx, positions, self.delta)
        self.slots += 1
        self.transmissions += len(tx.sender)
        if not found:
            self.clean_slots += 1
        elif self.keep_rows:
            self.violations.extend(found)
        return found

    @property
    def violation_count(self) -> int:
        return self.slots - self.clean_slots

    def merge(self, other: "AuditLog") -> None:
        self.slots += other.slots
        self.transmissions += other.transmissions
        self.clean_slots += other.clean_slots
        self.violations.extend(other.violations)


AUDIT_HEADER = ("slot", "sender", "receiver", "interferer", "distance")


def write_violations_csv(violations: Sequence[Violation], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUDIT_HEADER)
        for v in violations:
            w.writerow((v.slot, v.sender, v.receiver, "" if v.interferer is None else v.interferer,
                        f"{v.distance:.6g}"))
