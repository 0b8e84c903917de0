import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dcmcast.torus import CellGrid, Point, torus_delta
from dcmcast.wireless import (AUDIT_HEADER, AuditLog, GridTooCoarse, SlotTransmissions, TransmissionIntent,
                              Violation, audit_arrays, audit_slot, build_coloring, exclusion_disjointness,
                              reuse_distance, write_violations_csv)


def test_reuse_distance_example_n500():
    grid = CellGrid(22)
    c = build_coloring(grid, math.sqrt(2) / 22, 1.0)
    assert c.k == 8 == math.ceil(5 * math.sqrt(2))
    # 22 = 11 + 11: two blocks per axis, offsets 0..10
    assert c.colors_per_axis == 11 and c.period == 121


def test_period_is_k_squared_when_k_divides_g():
    c = build_coloring(CellGrid(24), math.sqrt(2) / 24, 1.0)
    assert c.k == 8 and c.period == 64
    cells = np.array([(i, j) for i in range(24) for j in range(24)])
    assert np.array_equal(c.colors_of(cells), (cells[:, 0] % 8) * 8 + cells[:, 1] % 8)


def test_reuse_distance_small_guard():
    for g in (5, 10, 40):
        assert reuse_distance(g, 1 / (2 * g), 1e-12) == 4


def test_coloring_is_a_function():
    c = build_coloring(CellGrid(47), math.sqrt(2) / 47, 1.0)
    assert c.phase((3, 5)) == c.phase((3, 5))


def test_coloring_rejects_bad_input():
    with pytest.raises(GridTooCoarse):
        build_coloring(CellGrid(4), math.sqrt(2) / 4, 1.0)
    with pytest.raises(ValueError):
        build_coloring(CellGrid(10), 0.6, 1.0)
    with pytest.raises(ValueError):
        build_coloring(CellGrid(10), 0.1, 0.0)


@pytest.mark.parametrize("g", [8, 9, 22, 23, 31, 47])
def test_same_colored_cells_are_k_apart(g):
    c = build_coloring(CellGrid(g), math.sqrt(2) / g, 1.0)
    cells = np.array([(i, j) for i in range(g) for j in range(g)])
    colors = c.colors_of(cells)
    for col in np.unique(colors):
        cs = cells[colors == col]
        d = np.abs(cs[:, None, :] - cs[None, :, :])
        sep = np.minimum(d, g - d).max(axis=-1)
        np.fill_diagonal(sep, g)
        assert sep.min() >= c.k


@pytest.mark.parametrize("g, delta", [(22, 1.0), (47, 1.0), (31, 0.5), (25, 2.0)])
def test_coloring_soundness_random_placements(g, delta):
    """One sender per same-colored cell, receivers anywhere in range: never a violation."""
    rng = np.random.default_rng(g)
    grid = CellGrid(g)
    radius = math.sqrt(2) / g
    c = build_coloring(grid, radius, delta)
    cells = np.array([(i, j) for i in range(g) for j in range(g)])
    colors = c.colors_of(cells)
    trials = 10**4
    picks = rng.integers(0, c.period, trials)
    senders, groups = [], []
    for t, col in enumerate(picks):
        cs = cells[colors == col]
        senders.append((cs + rng.random(cs.shape)) / g)
        groups.append(np.full(len(cs), t))
    spos = np.concatenate(senders)
    group = np.concatenate(groups)
    m = len(spos)
    # two receivers per sender, uniform in the disk of the radius
    owner = np.repeat(np.arange(m), 2)
    ang = rng.random(2 * m) * 2 * math.pi
    rad = radius * np.sqrt(rng.random(2 * m))
    rpos = np.mod(spos[owner] + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]), 1.0)
    positions = np.concatenate([spos, rpos])
    tx = SlotTransmissions(0, np.arange(m), np.full(m, radius), group, m + np.arange(2 * m), owner)
    assert audit_arrays(tx, positions, delta) == []


def test_single_transmission_in_range():
    pos = {0: Point(0.1, 0.1), 1: Point(0.12, 0.1)}
    assert audit_slot([TransmissionIntent(0, 0.05, (1,))], pos, 1.0) == []


def test_out_of_range_receiver_flagged():
    pos = {0: Point(0.1, 0.1), 1: Point(0.3, 0.1)}
    v = audit_slot([TransmissionIntent(0, 0.05, (1,))], pos, 1.0)
    assert len(v) == 1 and v[0].interferer is None and v[0].distance == pytest.approx(0.2)


def test_close_interferer_one_violation():
    a, delta = 0.05, 1.0
    pos = {0: Point(0.2, 0.5), 1: Point(0.2 + 0.9 * (1 + delta) * a, 0.5),
           2: Point(0.2 + 0.9 * (1 + delta) * a + 0.04, 0.5), 3: Point(0.2 - 0.04, 0.5)}
    # receiver 1 of sender 2 sits 0.9(1+delta)a from sender 0
    intents = [TransmissionIntent(0, a, (3,)), TransmissionIntent(2, a, (1,))]
    v = audit_slot(intents, pos, delta)
    assert v == [Violation(0, 2, 1, 0, pytest.approx(0.9 * (1 + delta) * a))]


def test_two_pairs_far_apart_succeed():
    # two sender/receiver pairs, each receiver beyond (1 + delta) a from the other sender
    a, delta = 0.05, 1.0
    pos = {0: Point(0.1, 0.5), 1: Point(0.14, 0.5), 2: Point(0.3, 0.5), 3: Point(0.26, 0.5)}
    intents = [TransmissionIntent(0, a, (1,)), TransmissionIntent(2, a, (3,))]
    assert audit_slot(intents, pos, delta) == []
    assert exclusion_disjointness(intents, pos, delta)


def test_exclusion_examples():
    a, delta = 0.1, 1.0
    one = [TransmissionIntent(0, a, (1,))]
    assert exclusion_disjointness(one, {0: Point(0, 0), 1: Point(0.05, 0)}, delta)
    two = [TransmissionIntent(0, a, (1,)), TransmissionIntent(2, a, (3,))]
    tangent = {0: Point(0.1, 0.1), 1: Point(0.2, 0.1), 2: Point(0.4, 0.1), 3: Point(0.3, 0.1)}
    assert exclusion_disjointness(two, tangent, delta)
    close = {0: Point(0.1, 0.1), 1: Point(0.2, 0.1), 2: Point(0.35, 0.1), 3: Point(0.25, 0.1)}
    assert not exclusion_disjointness(two, close, delta)


def test_intent_needs_receiver():
    with pytest.raises(ValueError):
        TransmissionIntent(0, 0.1, ())


@st.composite
def slots(draw):
    n_tx = draw(st.integers(1, 6))
    radius = draw(st.sampled_from([0.02, 0.05, 0.1]))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    spos = rng.random((n_tx, 2))
    per = rng.integers(1, 4, n_tx)
    owner = np.repeat(np.arange(n_tx), per)
    # mostly in range, sometimes not
    rpos = np.mod(spos[owner] + rng.uniform(-1.3 * radius, 1.3 * radius, (len(owner), 2)), 1.0)
    radii = radius * rng.choice([1.0, 0.5], n_tx)
    return spos, rpos, owner, radii, draw(st.sampled_from([0.5, 1.0, 2.0]))


def _as_tx(spos, rpos, owner, radii, groups=None):
    m = len(spos)
    group = np.zeros(m, dtype=np.int64) if groups is None else groups
    return SlotTransmissions(7, np.arange(m), radii, group, m + np.arange(len(rpos)), owner)


def _key(v):
    return (v.sender, v.receiver, v.interferer)


@given(slots())
def test_vectorized_audit_matches_reference(case):
    spos, rpos, owner, radii, delta = case
    tx = _as_tx(spos, rpos, owner, radii)
    positions = np.concatenate([spos, rpos])
    fast = sorted(map(_key, audit_arrays(tx, positions, delta)), key=str)
    slow = sorted(map(_key, audit_slot(tx.intents(), positions, delta)), key=str)
    assert fast == slow


@given(slots())
def test_clean_audit_implies_disjoint_exclusion(case):
    spos, rpos, owner, radii, delta = case
    positions = np.concatenate([spos, rpos])
    intents = _as_tx(spos, rpos, owner, radii).intents()
    if not audit_slot(intents, positions, delta):
        assert exclusion_disjointness(intents, positions, delta)


def test_groups_do_not_interfere():
    spos = np.array([[0.1, 0.1], [0.11, 0.1]])
    rpos = np.array([[0.105, 0.1], [0.106, 0.1]])
    positions = np.concatenate([spos, rpos])
    same = _as_tx(spos, rpos, np.array([0, 1]), np.full(2, 0.02))
    assert len(audit_arrays(same, positions, 1.0)) == 2
    split = _as_tx(spos, rpos, np.array([0, 1]), np.full(2, 0.02), groups=np.array([0, 1]))
    assert audit_arrays(split, positions, 1.0) == []


def test_audit_log_and_csv(tmp_path):
    spos = np.array([[0.1, 0.1], [0.11, 0.1]])
    rpos = np.array([[0.105, 0.1], [0.106, 0.1]])
    positions = np.concatenate([spos, rpos])
    log = AuditLog(1.0)
    log.record(_as_tx(spos, rpos, np.array([0, 1]), np.full(2, 0.02)), positions)
    log.record(_as_tx(spos[:1], rpos[:1] * 0 + spos[:1], np.array([0]), np.full(1, 0.02)), positions)
    assert log.slots == 2 and log.clean_slots == 1 and log.violation_count == 1
    path = tmp_path / "audit.csv"
    write_violations_csv(log.violations, path)
    lines = path.read_bytes().split(b"\n")
    assert lines[0].decode() == ",".join(AUDIT_HEADER)
    assert len([l for l in lines if l]) == 3
