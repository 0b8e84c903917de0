# # Nodes on a torus
#
# Positions live on the unit torus, so the left edge touches the right one and
# the bottom touches the top.  This notebook looks at distances, cell grids and
# how far nodes travel per slot under the three mobility models.

# +
import numpy as np

from dcmcast.mobility import MobilitySpec, advance_positions, initial_walk_cells
from dcmcast.torus import CellGrid, Point, torus_distance, torus_distances

a, b = Point(0.1, 0.1), Point(0.9, 0.1)
print("wrap-around distance:", torus_distance(a, b))
print("farthest two points can be:", torus_distance(Point(0, 0), Point(0.5, 0.5)))
# -

# A grid with g cells per side; every point falls in exactly one cell.

# +
rng = np.random.default_rng(0)
pts = rng.random((100_000, 2))
grid = CellGrid(10)
counts = np.bincount(grid.flat_cells_of(pts), minlength=grid.n_cells)
print("points per cell: min %d, max %d, mean %.1f" % (counts.min(), counts.max(), counts.mean()))
# -

# ## One slot of motion
#
# For a network of 400 sessions the walk grid is 20 x 20 and waypoint steps
# are drawn from [0.05, 0.15] per axis.

# +
n_s = 400
for kind in ("iid", "walk", "waypoint"):
    spec = MobilitySpec.for_sessions(kind, n_s, random_signs=True)
    pos = rng.random((5000, 2))
    cells = initial_walk_cells(spec, pos)
    new, _ = advance_positions(spec, pos, cells, rng)
    hop = torus_distances(pos, new)
    print(f"{kind:9s} mean hop {hop.mean():.3f}  90th pct {np.percentile(hop, 90):.3f}")
# -

# ## Mixing
#
# How many slots until a walker forgets where it started?  Start everyone in
# the same sub-square and watch the occupancy spread out.

# +
spec = MobilitySpec.for_sessions("walk", n_s)
pos = np.full((20_000, 2), 0.01)
cells = initial_walk_cells(spec, pos)
for t in range(1, 201):
    pos, cells = advance_positions(spec, pos, cells, rng)
    if t in (1, 10, 50, 200):
        occ = np.bincount(cells[:, 0] * 20 + cells[:, 1], minlength=400)
        print(f"slot {t:3d}: occupied sub-squares {np.count_nonzero(occ):3d}/400, max load {occ.max()}")
