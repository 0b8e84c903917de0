"""Per-slot position updates: 2D-i.i.d., random walk on sub-squares, random waypoint.

The engine moves every node at once through :func:`advance_positions`;
:func:`advance` is the single-node form of the same update.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .torus import CellGrid, Point, wrap

log = logging.getLogger(__name__)


class MobilityKind(str, enum.Enum):
    IID = "iid"
    WALK = "walk"
    WAYPOINT = "waypoint"

    @classmethod
    def parse(cls, value) -> "MobilityKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown mobility kind {value!r}; expected one of iid, walk, waypoint") from None


class ConfigurationError(ValueError):
    """Raised when a mobility spec and a node state do not fit together."""


@dataclass(frozen=True)
class MobilitySpec:
    kind: MobilityKind
    walk_grid: Optional[CellGrid] = None
    step_range: Optional[tuple[float, float]] = None
    random_signs: bool = False

    def __post_init__(self):
        kind = MobilityKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is MobilityKind.WALK and self.walk_grid is None:
            raise ConfigurationError("random walk mobility needs a walk grid")
        if kind is MobilityKind.WAYPOINT:
            if self.step_range is None:
                raise ConfigurationError("random waypoint mobility needs a step range")
            lo, hi = self.step_range
            if not 0 < lo < hi <= 1:
                raise ConfigurationError(f"step range must satisfy 0 < lo < hi <= 1, got {self.step_range}")

    @classmethod
    def for_sessions(cls, kind, n_s: int, random_signs: bool = False) -> "MobilitySpec":
        """Build the mobility parameters used for a network of ``n_s`` sessions.

        The walk grid has ``round(sqrt(n_s))`` sub-squares per side and waypoint
        steps are drawn per axis from ``[1/sqrt(n_s), 3/sqrt(n_s)]``.
        """
        kind = MobilityKind.parse(kind)
        if kind is MobilityKind.WALK:
            g = max(1, round(math.sqrt(n_s)))
            if g * g != n_s:
                log.warning("n_s=%d is not a perfect square; random walk uses %d sub-squares", n_s, g * g)
            return cls(kind, walk_grid=CellGrid(g))
        if kind is MobilityKind.WAYPOINT:
            root = math.sqrt(n_s)
            return cls(kind, step_range=(1.0 / root, min(1.0, 3.0 / root)), random_signs=random_signs)
        return cls(kind)


@dataclass(frozen=True)
class Role:
    session: int
    ordinal: Optional[int] = None  # None for the source, 1..p for destinations

    @property
    def is_source(self) -> bool:
        return self.ordinal is None


@dataclass(frozen=True)
class NodeState:
    node_id: int
    role: Role
    position: Point
    walk_cell: Optional[tuple[int, int]] = None


def initial_walk_cells(spec: MobilitySpec, positions: np.ndarray) -> Optional[np.ndarray]:
    if spec.kind is not MobilityKind.WALK:
        return None
    return spec.walk_grid.cells_of(positions)


def advance_positions(spec: MobilitySpec, positions: np.ndarray, walk_cells: Optional[np.ndarray],
                      rng: np.random.Generator) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Move all nodes by one slot. Returns new ``(positions, walk_cells)``."""
    n = len(positions)
    if spec.kind is MobilityKind.IID:
        return rng.random((n, 2)), None

    if spec.kind is MobilityKind.WALK:
        if walk_cells is None:
            raise ConfigurationError("random walk mobility requires walk cells")
        g = spec.walk_grid.g
        # 9 equally likely moves: stay or one of the 8 neighbours
        cells = np.mod(walk_cells + rng.integers(-1, 2, size=(n, 2)), g)
        return wrap((cells + rng.random((n, 2))) / g), cells

    lo, hi = spec.step_range
    step = rng.uniform(lo, hi, size=(n, 2))
    if spec.random_signs:
        step *= rng.choice((-1.0, 1.0), size=(n, 2))
    return wrap(positions + step), None


def advance(spec: MobilitySpec, state: NodeState, rng: np.random.Generator) -> NodeState:
    has_cell = state.walk_cell is not None
    if has_cell != (spec.kind is MobilityKind.WALK):
        raise ConfigurationError(
            f"node {state.node_id}: walk cell must be present exactly for random walk mobility")
    cells = None if state.walk_cell is None else np.array([state.walk_cell])
    pos, cells = advance_positions(spec, state.position.as_array()[None, :], cells, rng)
    walk_cell = None if cells is None else (int(cells[0, 0]), int(cells[0, 1]))
    return replace(state, position=Point(*pos[0]), walk_cell=walk_cell)
