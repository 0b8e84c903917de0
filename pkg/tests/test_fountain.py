import numpy as np
import pytest
from hypothesis import given, strategies as st

from dcmcast.fountain import (CodedPacket, DecoderMismatch, DecoderState, can_decode, encode, generator_row,
                              gf2_rank, ingest, packets_to_decode)


def full_rank_probability(q, m):
    """Exact probability that m uniform non-zero q-bit rows span GF(2)^q (Markov chain on the rank)."""
    dist = np.zeros(q + 1)
    dist[0] = 1.0
    nonzero = 2.0 ** q - 1
    for _ in range(m):
        r = np.arange(q + 1)
        stay = (2.0 ** r - 1) / nonzero
        nxt = dist * stay
        nxt[1:] += dist[:-1] * (1 - stay[:-1])
        dist = nxt
    return dist[q]


def _pkt(index, bits, session=0):
    row = sum(1 << b for b, v in enumerate(bits) if v)
    return CodedPacket(session, 0, index, len(bits), row)


def test_q1_rows_are_all_one():
    pkts = encode(3, 0, 1, 5)
    assert len(pkts) == 5 and all(p.row == 1 for p in pkts)
    assert [p.index for p in pkts] == list(range(5))


def test_encode_is_deterministic_and_keyed():
    a = encode(2, 1, 32, 50, seed=9)
    assert a == encode(2, 1, 32, 50, seed=9)
    assert a != encode(2, 2, 32, 50, seed=9)
    assert a[7].row == generator_row(9, 2, 1, 7, 32)


def test_encode_rejects_bad_sizes():
    with pytest.raises(ValueError):
        encode(0, 0, 0, 3)
    with pytest.raises(ValueError):
        encode(0, 0, 4, 0)


def test_generator_bits_are_fair():
    pkts = encode(0, 0, 32, 10**4)
    freq = np.array([p.bits for p in pkts]).mean(axis=0)
    assert np.all(np.abs(freq - 0.5) <= 0.02)
    assert all(p.row != 0 for p in pkts)


def test_ingest_examples():
    s = DecoderState(0, 2)
    ingest(s, _pkt(0, [0, 1]))
    ingest(s, _pkt(1, [1, 1]))
    assert s.rank == 2 and can_decode(s)
    s = DecoderState(0, 2)
    ingest(s, _pkt(0, [0, 1]))
    ingest(s, _pkt(1, [0, 1]))
    assert s.rank == 1 and not can_decode(s)


def test_duplicate_index_is_ignored():
    s = DecoderState(0, 3)
    ingest(s, _pkt(4, [1, 0, 1]))
    before = (set(s.received), s.rank, dict(s._basis))
    ingest(s, _pkt(4, [0, 1, 0]))
    assert (s.received, s.rank, s._basis) == before


def test_mismatches_raise():
    s = DecoderState(1, 4)
    with pytest.raises(DecoderMismatch):
        ingest(s, _pkt(0, [1, 0, 0, 0], session=2))
    with pytest.raises(DecoderMismatch):
        ingest(s, _pkt(0, [1, 0, 0], session=1))


def test_single_packet_decodes_q1():
    s = DecoderState(0, 1)
    ingest(s, encode(0, 0, 1, 1)[0])
    assert can_decode(s)


def test_too_few_packets_never_decode():
    for t in range(200):
        s = DecoderState(t, 32)
        for p in encode(t, 0, 32, 31):
            ingest(s, p)
        assert not can_decode(s)


@given(st.integers(1, 40), st.integers(0, 60), st.integers(0, 2**31))
def test_rank_monotone_bounded_and_matches_oracle(q, count, seed):
    s = DecoderState(0, q)
    rows = []
    decoded = False
    for p in encode(0, 0, q, count, seed=seed) if count else []:
        prev = s.rank
        ingest(s, p)
        rows.append(p.row)
        assert prev <= s.rank <= min(q, len(s.received))
        if decoded:
            assert can_decode(s)
        decoded = can_decode(s)
    assert s.rank == gf2_rank(rows)


def test_gf2_rank_against_numpy_on_small_matrices():
    rng = np.random.default_rng(0)
    for _ in range(200):
        q, m = rng.integers(1, 9, 2)
        mat = rng.integers(0, 2, (m, q))
        rows = [int("".join(map(str, r[::-1])), 2) for r in mat]
        # brute force: rank = log2 of the number of distinct subset sums
        span = {0}
        for r in rows:
            span |= {x ^ r for x in span}
        assert 2 ** gf2_rank(rows) == len(span)


def test_exact_rank_oracle_values():
    assert full_rank_probability(1, 1) == 1.0
    assert full_rank_probability(2, 2) == pytest.approx(2 / 3)
    # q + 10 rows: failure close to 2^-10
    assert 1 - full_rank_probability(32, 42) == pytest.approx(2 ** -10, rel=0.01)


def test_q32_with_42_packets_decodes_at_oracle_rate():
    trials = 10**4
    fails = 0
    for t in range(trials):
        s = DecoderState(t, 32)
        for p in encode(t, 0, 32, 42, seed=1):
            ingest(s, p)
        fails += not can_decode(s)
    p_fail = 1 - full_rank_probability(32, 42)
    assert p_fail <= 1e-3
    # Monte Carlo consistent with the oracle (4 sigma) and comfortably below 0.2 percent
    assert abs(fails / trials - p_fail) <= 4 * np.sqrt(p_fail / trials)


@pytest.mark.parametrize("q", [16, 64])
def test_overhead_law(q):
    rng = np.random.default_rng(q)
    needed = np.array([packets_to_decode(q, rng) for _ in range(10**4)])
    assert needed.min() >= q
    assert np.mean(needed > q + 10) <= 2 * 2 ** -10


def test_quarter_overhead_contract_for_q40():
    # 1.25 Q packets with Q = 40 leaves 10 spare rows
    assert full_rank_probability(40, 50) >= 0.999
    rng = np.random.default_rng(40)
    needed = np.array([packets_to_decode(40, rng) for _ in range(10**4)])
    p_fail = 1 - full_rank_probability(40, 50)
    assert abs(np.mean(needed > 50) - p_fail) <= 4 * np.sqrt(p_fail / 10**4)
