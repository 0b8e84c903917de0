"""Geometry of the unit torus: wrap-around distances, square cell grids, sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DISTANCE = np.sqrt(2.0) / 2.0


def wrap(values):
    """Map coordinates into the half-open interval [0, 1)."""
    out = np.mod(values, 1.0)
    # np.mod(-1e-17, 1.0) rounds to exactly 1.0
    return np.where(out >= 1.0, 0.0, out)


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(wrap(self.x)))
        object.__setattr__(self, "y", float(wrap(self.y)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class CellGrid:
    """Partition of the torus into ``g * g`` square cells of side ``1/g``."""

    g: int

    def __post_init__(self):
        if int(self.g) != self.g or self.g < 1:
            raise ValueError(f"cell grid side count must be a positive integer, got {self.g!r}")
        object.__setattr__(self, "g", int(self.g))

    @property
    def side(self) -> float:
        return 1.0 / self.g

    @property
    def n_cells(self) -> int:
        return self.g * self.g

    def cells_of(self, positions: np.ndarray) -> np.ndarray:
        """Cell indices ``(i, j)`` for an ``(n, 2)`` array of positions."""
        idx = np.floor(np.asarray(positions) * self.g).astype(np.int64)
        # guards against x*g rounding up to g for x just below 1
        return np.minimum(idx, self.g - 1)

    def flat_cells_of(self, positions: np.ndarray) -> np.ndarray:
        idx = self.cells_of(positions)
        return idx[..., 0] * self.g + idx[..., 1]


def torus_delta(a, b):
    """Per-axis wrap-around separation between coordinate arrays."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return np.minimum(d, 1.0 - d)


def torus_distances(a, b):
    """Vectorized torus distance between broadcastable ``(..., 2)`` arrays."""
    d = torus_delta(a, b)
    return np.sqrt(np.sum(d * d, axis=-1))


def torus_distance(a: Point, b: Point) -> float:
    return float(torus_distances(a.as_array(), b.as_array()))


def cell_of(p: Point, grid: CellGrid) -> tuple[int, int]:
    i, j = grid.cells_of(p.as_array())
    return int(i), int(j)


def uniform_points(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent uniform positions as an ``(n, 2)`` array."""
    return rng.random((n, 2))


def uniform_point(rng: np.random.Generator) -> Point:
    x, y = rng.random(2)
    return Point(x, y)
