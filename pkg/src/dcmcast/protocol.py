"""Joint coding-scheduling engine.

Time is grouped into supertime slots of ``2D`` slots.  In each supertime slot
every source encodes its data into ``D`` coded packets, then

1. broadcasting (``D`` slots): in every broadcasting cell one source with
   packets left sends its next coded packet to up to ``floor(9(p+1)/10)``
   other mobiles in the cell, which keep it as a duplicate;
2. deletion: every mobile keeps one random duplicate per session;
3. receiving (``D`` slots): a receiving cell holding at most two deliverable
   duplicates broadcasts them to the session's destinations in the cell;
   afterwards all duplicates are dropped.

Node ids: source of session ``i`` is ``i``; destination ``l`` (0-based) of
session ``i`` is ``n_s + i * p + l``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from . import fountain
from .mobility import MobilityKind, MobilitySpec, advance_positions, initial_walk_cells
from .torus import CellGrid, uniform_points
from .wireless import AuditLog, Coloring, GridTooCoarse, SlotTransmissions, build_coloring

log = logging.getLogger(__name__)

SUBSLOTS_PER_RECEIVING_CELL = 2


class Mode(str, enum.Enum):
    COUNT_DISTINCT = "count_distinct"
    CODED = "coded"


@dataclass(frozen=True)
class SimConfig:
    n_s: int
    p: int
    D: int
    W: float = 1.0
    delta: float = 1.0
    mobility: str = "iid"
    mode: str = "count_distinct"
    supertime_count: int = 10
    seed: int = 0
    overhead: float = 0.25
    broadcast_delivery: bool = True
    random_signs: bool = True
    audit: bool = True

    def __post_init__(self):
        for name in ("n_s", "p", "D"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.supertime_count < 1:
            raise ValueError("supertime_count must be >= 1")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "mobility", MobilityKind.parse(self.mobility).value)
        object.__setattr__(self, "mode", Mode(str(self.mode).lower()).value)

    @property
    def n(self) -> int:
        return self.n_s * (self.p + 1)

    @property
    def mobility_spec(self) -> MobilitySpec:
        return MobilitySpec.for_sessions(self.mobility, self.n_s, random_signs=self.random_signs)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class Session:
    id: int
    source: int
    destinations: tuple[int, ...]


def sessions(n_s: int, p: int) -> list[Session]:
    return [Session(i, i, tuple(n_s + i * p + l for l in range(p))) for i in range(n_s)]


def serial_coloring(grid: CellGrid) -> Coloring:
    """One color per cell: no two cells ever transmit at the same time."""
    return Coloring(grid, grid.g, np.arange(grid.g))


@dataclass(frozen=True)
class SupertimePlan:
    Q: int
    broadcast_grid: CellGrid
    receive_grid: CellGrid
    broadcast_radius: float
    receive_radius: float
    phase_length: int
    recipients: int
    broadcast_coloring: Coloring
    receive_coloring: Coloring


def _coloring(grid: CellGrid, radius: float, delta: float) -> Coloring:
    try:
        return build_coloring(grid, radius, delta)
    except GridTooCoarse:
        log.info("grid g=%d too coarse for spatial reuse; scheduling cells one at a time", grid.g)
        return serial_coloring(grid)


def data_packets_per_source(n_s: int, D: int) -> int:
    return max(1, math.floor(D / 500 * math.sqrt(D / n_s)))


def plan_supertime(config: SimConfig) -> SupertimePlan:
    g1 = max(1, round(math.sqrt(config.n_s)))
    g2 = max(1, round((config.n_s * config.p ** 2 * config.D) ** 0.25))
    r1 = min(0.5, math.sqrt(2.0) / g1)
    r2 = min(0.5, math.sqrt(2.0) / g2)
    b_grid, r_grid = CellGrid(g1), CellGrid(g2)
    return SupertimePlan(
        Q=data_packets_per_source(config.n_s, config.D),
        broadcast_grid=b_grid,
        receive_grid=r_grid,
        broadcast_radius=r1,
        receive_radius=r2,
        phase_length=config.D,
        recipients=(9 * (config.p + 1)) // 10,
        broadcast_coloring=_coloring(b_grid, r1, config.delta),
        receive_coloring=_coloring(r_grid, r2, config.delta),
    )


@dataclass(frozen=True)
class DuplicateRecord:
    session: int
    index: int
    carrier: int


@dataclass
class World:
    """Mutable simulation state shared by the phases of a run."""

    config: SimConfig
    mobility: MobilitySpec
    positions: np.ndarray
    walk_cells: Optional[np.ndarray]
    session_of: np.ndarray
    slot: int = 0
    supertime: int = 0
    next_index: np.ndarray = None
    dup_carrier: np.ndarray = None
    dup_session: np.ndarray = None
    dup_index: np.ndarray = None
    audit: Optional[AuditLog] = None
    trace: Optional[Callable[[int, int, int, int], None]] = None
    # broadcast-phase statistics for the current supertime slot
    source_slots: int = 0
    full_broadcasts: int = 0

    @classmethod
    def create(cls, config: SimConfig, rng: np.random.Generator, audit: Optional[AuditLog] = None,
               trace=None) -> "World":
        spec = config.mobility_spec
        positions = uniform_points(rng, config.n)
        session_of = np.concatenate([np.arange(config.n_s), np.repeat(np.arange(config.n_s), config.p)])
        world = cls(config, spec, positions, initial_walk_cells(spec, positions), session_of,
                    audit=audit, trace=trace)
        world.reset_supertime()
        return world

    def reset_supertime(self) -> None:
        self.next_index = np.zeros(self.config.n_s, dtype=np.int64)
        self.dup_carrier = np.empty(0, dtype=np.int64)
        self.dup_session = np.empty(0, dtype=np.int64)
        self.dup_index = np.empty(0, dtype=np.int64)
        self.source_slots = 0
        self.full_broadcasts = 0

    def step(self, rng: np.random.Generator) -> None:
        self.positions, self.walk_cells = advance_positions(self.mobility, self.positions, self.walk_cells, rng)
        self.slot += 1

    def is_destination(self, nodes) -> np.ndarray:
        return np.asarray(nodes) >= self.config.n_s

    def ordinal_of(self, nodes) -> np.ndarray:
        """0-based destination ordinal within its session (only meaningful for destinations)."""
        return (np.asarray(nodes) - self.config.n_s) % self.config.p

    def duplicates(self) -> list[DuplicateRecord]:
        return [DuplicateRecord(int(s), int(k), int(c))
                for c, s, k in zip(self.dup_carrier, self.dup_session, self.dup_index)]

    def max_duplicates_per_session(self) -> int:
        """Largest number of duplicates of one session held by one mobile."""
        if len(self.dup_carrier) == 0:
            return 0
        key = self.dup_carrier * self.config.n_s + self.dup_session
        return int(np.unique(key, return_counts=True)[1].max())


@dataclass
class DeliveryLedger:
    """Distinct coded indices each destination received in the current supertime slot."""

    n_s: int
    p: int
    D: int
    supertime: int = 0
    received: np.ndarray = None
    decoded: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.received is None:
            self.received = np.zeros((self.n_s, self.p, self.D), dtype=bool)

    def counts(self) -> np.ndarray:
        """``|X_{i,l}|`` as an ``(n_s, p)`` array."""
        return self.received.sum(axis=2)

    def indices(self, session: int, ordinal: int) -> set[int]:
        return set(np.nonzero(self.received[session, ordinal])[0].tolist())

    @property
    def session_decoded(self) -> Optional[np.ndarray]:
        return None if self.decoded is None else self.decoded.all(axis=1)


def _cell_ranks(sorted_cells: np.ndarray, count: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Each element's rank inside its cell, for cell labels already in sorted order."""
    start = np.cumsum(count) - count
    return sorted_cells, np.arange(len(sorted_cells)) - start[sorted_cells]


def phase_broadcast(world: World, plan: SupertimePlan, ledger: DeliveryLedger,
                    rng: np.random.Generator) -> World:
    cfg = world.config
    n_s, n = cfg.n_s, cfg.n
    grid, coloring = plan.broadcast_grid, plan.broadcast_coloring
    carriers, dsessions, dindices = [world.dup_carrier], [world.dup_session], [world.dup_index]
    for _ in range(plan.phase_length):
        world.step(rng)
        cells = grid.flat_cells_of(world.positions)

        eligible = np.nonzero(world.next_index < cfg.D)[0]
        # first occurrence per cell in a random order = uniform pick among the cell's sources
        perm = rng.permutation(eligible)
        _, first = np.unique(cells[perm], return_index=True)
        senders = perm[first]
        world.source_slots += n_s

        has_sender = np.full(grid.n_cells, -1, dtype=np.int64)
        has_sender[cells[senders]] = senders
        count = np.bincount(cells, minlength=grid.n_cells)
        # random order inside each cell, senders last so ranks 0..count-2 are the others
        key = cells + 0.5 * rng.random(n)
        key[senders] = cells[senders] + 0.75
        node_order = np.argsort(key)
        sorted_cells, rank = _cell_ranks(cells[node_order], count)
        quota = np.minimum(plan.recipients, count - 1)
        take = (has_sender[sorted_cells] >= 0) & (rank < quota[sorted_cells])
        recv = node_order[take]
        recv_sender = has_sender[cells[recv]]

        active = np.sort(senders[quota[cells[senders]] > 0])
        world.full_broadcasts += int(np.count_nonzero(quota[cells[active]] >= plan.recipients))
        if len(active) == 0:
            continue
        s_of_recv = world.session_of[recv_sender]
        idx_of_recv = world.next_index[s_of_recv]
        carriers.append(recv)
        dsessions.append(s_of_recv)
        dindices.append(idx_of_recv)

        if cfg.broadcast_delivery:
            own = world.is_destination(recv) & (world.session_of[recv] == s_of_recv)
            hit = recv[own]
            ledger.received[world.session_of[hit], world.ordinal_of(hit), idx_of_recv[own]] = True

        if world.audit is not None or world.trace is not None:
            pos = np.searchsorted(active, recv_sender)
            tx = SlotTransmissions(
                slot=world.slot,
                sender=active,
                radius=np.full(len(active), plan.broadcast_radius),
                group=coloring.colors_of(grid.cells_of(world.positions[active])),
                receiver=recv,
                owner=pos,
            )
            if world.audit is not None:
                world.audit.record(tx, world.positions)
            if world.trace is not None:
                sizes = np.bincount(pos, minlength=len(active))
                for s, c in zip(active, sizes):
                    world.trace(world.slot, int(cells[s]), int(s), int(c))
        world.next_index[world.session_of[active]] += 1

    world.dup_carrier = np.concatenate(carriers)
    world.dup_session = np.concatenate(dsessions)
    world.dup_index = np.concatenate(dindices)
    return world


def phase_deletion(world: World, rng: np.random.Generator) -> World:
    """Keep one uniformly chosen duplicate per (mobile, session)."""
    if len(world.dup_carrier) == 0:
        return world
    perm = rng.permutation(len(world.dup_carrier))
    key = world.dup_carrier[perm] * world.config.n_s + world.dup_session[perm]
    # first occurrence in a random order is a uniform pick within each group
    _, first = np.unique(key, return_index=True)
    kept = perm[first]
    world.dup_carrier = world.dup_carrier[kept]
    world.dup_session = world.dup_session[kept]
    world.dup_index = world.dup_index[kept]
    return world


def phase_receiving(world: World, plan: SupertimePlan, ledger: DeliveryLedger,
                    rng: np.random.Generator) -> tuple[World, DeliveryLedger]:
    cfg = world.config
    n_s, p, n = cfg.n_s, cfg.p, cfg.n
    grid, coloring = plan.receive_grid, plan.receive_coloring
    hold = np.full((n, n_s), -1, dtype=np.int32)
    hold[world.dup_carrier, world.dup_session] = world.dup_index
    dests = np.arange(n_s, n)
    d_session = world.session_of[dests]
    d_ordinal = world.ordinal_of(dests)

    for _ in range(plan.phase_length):
        world.step(rng)
        cells = grid.flat_cells_of(world.positions)
        node_order = np.argsort(cells, kind="stable")
        count = np.bincount(cells, minlength=grid.n_cells)
        start = np.concatenate(([0], np.cumsum(count)[:-1]))

        # every (destination, co-located mobile) pair
        reps = count[cells[dests]]
        pair_d = np.repeat(np.arange(len(dests)), reps)
        offset = np.arange(len(pair_d)) - np.repeat(np.cumsum(reps) - reps, reps)
        pair_m = node_order[np.repeat(start[cells[dests]], reps) + offset]
        other = pair_m != dests[pair_d]
        pair_d, pair_m = pair_d[other], pair_m[other]
        pair_s = d_session[pair_d]
        idx = hold[pair_m, pair_s]
        held = idx >= 0
        pair_d, pair_m, pair_s, idx = pair_d[held], pair_m[held], pair_s[held], idx[held]
        useful = ~ledger.received[pair_s, d_ordinal[pair_d], idx]

        rec_key = pair_m * n_s + pair_s
        deliverable = np.unique(rec_key[useful])
        if len(deliverable) == 0:
            continue
        rec_cell = cells[deliverable // n_s]
        per_cell = np.bincount(rec_cell, minlength=grid.n_cells)
        sending = deliverable[per_cell[rec_cell] <= SUBSLOTS_PER_RECEIVING_CELL]
        if len(sending) == 0:
            continue

        heard = np.isin(rec_key, sending)
        got = heard & useful
        ledger.received[pair_s[got], d_ordinal[pair_d[got]], idx[got]] = True

        if world.audit is not None or world.trace is not None:
            sender = sending // n_s
            s_cell = cells[sender]
            # deliverable keys are sorted by carrier, so cell-mates are not adjacent; rank by cell
            sub_order = np.lexsort((sending, s_cell))
            _, sub_rank = _cell_ranks(s_cell[sub_order], np.bincount(s_cell, minlength=grid.n_cells))
            sub = np.empty(len(sending), dtype=np.int64)
            sub[sub_order] = sub_rank
            group = coloring.colors_of(grid.cells_of(world.positions[sender])) * SUBSLOTS_PER_RECEIVING_CELL + sub
            tx = SlotTransmissions(
                slot=world.slot,
                sender=sender,
                radius=np.full(len(sending), plan.receive_radius),
                group=group,
                receiver=dests[pair_d[heard]],
                owner=np.searchsorted(sending, rec_key[heard]),
            )
            if world.audit is not None:
                world.audit.record(tx, world.positions)
            if world.trace is not None:
                sizes = np.bincount(tx.owner, minlength=len(sending))
                for s, c, k in zip(sender, s_cell, sizes):
                    world.trace(world.slot, int(c), int(s), int(k))

    world.dup_carrier = np.empty(0, dtype=np.int64)
    world.dup_session = np.empty(0, dtype=np.int64)
    world.dup_index = np.empty(0, dtype=np.int64)
    if cfg.mode == Mode.CODED.value:
        ledger.decoded = decode_ledger(ledger, plan.Q, cfg.seed)
    return world, ledger


def decode_ledger(ledger: DeliveryLedger, q: int, seed: int) -> np.ndarray:
    """Run the fountain decoder for every destination on the indices it received."""
    decoded = np.zeros((ledger.n_s, ledger.p), dtype=bool)
    rows: dict[tuple[int, int], fountain.CodedPacket] = {}
    for i in range(ledger.n_s):
        for l in range(ledger.p):
            got = np.nonzero(ledger.received[i, l])[0]
            if len(got) < q:
                continue
            state = fountain.DecoderState(session=i, q=q)
            for k in got.tolist():
                pkt = rows.get((i, k))
                if pkt is None:
                    pkt = rows[(i, k)] = fountain.CodedPacket(
                        i, ledger.supertime, k, q, fountain.generator_row(seed, i, ledger.supertime, k, q))
                fountain.ingest(state, pkt)
                if fountain.can_decode(state):
                    break
            decoded[i, l] = fountain.can_decode(state)
    return decoded


@dataclass
class SupertimeReport:
    supertime: int
    counts: np.ndarray            # (n_s, p) distinct coded packets per destination
    broadcast: np.ndarray         # (n_s,) coded packets each source sent out
    decoded: Optional[np.ndarray]
    max_duplicates_after_deletion: int
    source_slots: int
    full_broadcasts: int
    audit_slots: int = 0
    audit_violations: int = 0
    ledger: Optional[DeliveryLedger] = None

    @property
    def session_min(self) -> np.ndarray:
        return self.counts.min(axis=1)

    @property
    def session_decoded(self) -> Optional[np.ndarray]:
        """Per session: did every destination decode (CODED mode only)."""
        return None if self.decoded is None else self.decoded.all(axis=1)

    @property
    def delivered_mean(self) -> float:
        """Mean over sessions of the per-session mean distinct deliveries."""
        return float(self.counts.mean())


def run_supertime(config: SimConfig, rng: np.random.Generator, world: Optional[World] = None,
                  plan: Optional[SupertimePlan] = None) -> tuple[SupertimeReport, World]:
    """Execute one supertime slot. Pass ``world`` to continue an existing run."""
    if world is None:
        world = World.create(config, rng, audit=AuditLog(config.delta, keep_rows=True) if config.audit else None)
    plan = plan or plan_supertime(config)
    world.reset_supertime()
    ledger = DeliveryLedger(config.n_s, config.p, config.D, supertime=world.supertime)
    slots0 = world.audit.slots if world.audit else 0
    bad0 = world.audit.violation_count if world.audit else 0

    phase_broadcast(world, plan, ledger, rng)
    phase_deletion(world, rng)
    max_dups = world.max_duplicates_per_session()
    broadcast = world.next_index.copy()
    source_slots, full = world.source_slots, world.full_broadcasts
    phase_receiving(world, plan, ledger, rng)

    report = SupertimeReport(
        supertime=world.supertime,
        counts=ledger.counts(),
        broadcast=broadcast,
        decoded=ledger.decoded,
        max_duplicates_after_deletion=max_dups,
        source_slots=source_slots,
        full_broadcasts=full,
        audit_slots=(world.audit.slots - slots0) if world.audit else 0,
        audit_violations=(world.audit.violation_count - bad0) if world.audit else 0,
        ledger=ledger,
    )
    world.supertime += 1
    return report, world


@dataclass
class SimulationResult:
    config: SimConfig
    reports: list[SupertimeReport] = field(default_factory=list)
    audit: Optional[AuditLog] = None

    @property
    def delivered_mean(self) -> float:
        """Per-session distinct deliveries per supertime slot, averaged over supertime slots."""
        return float(np.mean([r.delivered_mean for r in self.reports]))

    @property
    def throughput(self) -> float:
        return self.delivered_mean

    @property
    def max_duplicates_after_deletion(self) -> int:
        return max(r.max_duplicates_after_deletion for r in self.reports)

    @property
    def audit_violations(self) -> int:
        return sum(r.audit_violations for r in self.reports)

    @property
    def audit_slots(self) -> int:
        return sum(r.audit_slots for r in self.reports)


def simulate(config: SimConfig, trace=None) -> SimulationResult:
    """Run ``config.supertime_count`` consecutive supertime slots from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    audit = AuditLog(config.delta) if config.audit else None
    world = World.create(config, rng, audit=audit, trace=trace)
    plan = plan_supertime(config)
    result = SimulationResult(config, audit=audit)
    for _ in range(config.supertime_count):
        report, world = run_supertime(config, rng, world, plan)
        result.reports.append(report)
    return result


@dataclass
class RoundRobinResult:
    throughput: np.ndarray   # packets per slot per session
    delay: int
    slots: int
    audit_violations: int


def run_round_robin(config: SimConfig) -> RoundRobinResult:
    """Sources take turns broadcasting one packet to the whole network (radius sqrt(2)/2)."""
    rng = np.random.default_rng(config.seed)
    world = World.create(config, rng)
    audit = AuditLog(config.delta)
    slots = config.n_s * config.supertime_count
    radius = math.sqrt(2.0) / 2.0
    delivered = np.zeros(config.n_s)
    everyone = np.arange(config.n)
    for t in range(slots):
        world.step(rng)
        src = t % config.n_s
        recv = everyone[everyone != src]
        if len(recv):
            audit.record(SlotTransmissions(world.slot, np.array([src]), np.array([radius]), np.zeros(1, dtype=np.int64),
                                           recv, np.zeros(len(recv), dtype=np.int64)), world.positions)
        delivered[src] += config.W
    return RoundRobinResult(delivered / slots, 1, slots, audit.violation_count)
