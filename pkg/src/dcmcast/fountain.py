"""Dense random-linear rateless code over GF(2).

Only generator rows are simulated: a coded packet is identified by
``(session, supertime, index)`` and its row is regenerated from those
identifiers, so no payload is ever carried.  Rows are Python ints used as
bit vectors; bit ``b`` is the coefficient of data packet ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DecoderMismatch(ValueError):
    pass


@dataclass(frozen=True)
class CodedPacket:
    session: int
    supertime: int
    index: int
    q: int
    row: int

    @property
    def bits(self) -> np.ndarray:
        return np.array([(self.row >> b) & 1 for b in range(self.q)], dtype=np.uint8)


def generator_row(seed: int, session: int, supertime: int, index: int, q: int) -> int:
    """Uniform non-zero ``q``-bit row drawn from a stream keyed by the packet identity."""
    rng = np.random.default_rng([seed, session, supertime, index])
    nbytes = (q + 7) // 8
    mask = (1 << q) - 1
    while True:
        row = int.from_bytes(rng.bytes(nbytes), "little") & mask
        if row:
            return row


def encode(session: int, supertime: int, q: int, count: int, seed: int = 0) -> list[CodedPacket]:
    if q < 1 or count < 1:
        raise ValueError(f"need q >= 1 and count >= 1, got q={q}, count={count}")
    return [CodedPacket(session, supertime, k, q, generator_row(seed, session, supertime, k, q))
            for k in range(count)]


@dataclass
class DecoderState:
    session: int
    q: int
    received: set = field(default_factory=set)
    rank: int = 0
    # reduced basis keyed by leading bit
    _basis: dict = field(default_factory=dict, repr=False)


def ingest(state: DecoderState, packet: CodedPacket) -> DecoderState:
    """Add one coded packet to the decoder; duplicates of a known index are ignored."""
    if packet.session != state.session:
        raise DecoderMismatch(f"packet of session {packet.session} fed to decoder of session {state.session}")
    if packet.q != state.q:
        raise DecoderMismatch(f"packet built for Q={packet.q}, decoder expects Q={state.q}")
    if packet.index in state.received:
        return state
    state.received.add(packet.index)
    row = packet.row
    while row:
        lead = row.bit_length() - 1
        pivot = state._basis.get(lead)
        if pivot is None:
            state._basis[lead] = row
            state.rank += 1
            break
        row ^= pivot
    return state


def can_decode(state: DecoderState) -> bool:
    return state.rank == state.q


def gf2_rank(rows) -> int:
    """Rank of a list of int bit-rows over GF(2)."""
    basis = {}
    for row in rows:
        row = int(row)
        while row:
            lead = row.bit_length() - 1
            if lead not in basis:
                basis[lead] = row
                break
            row ^= basis[lead]
    return len(basis)


def packets_to_decode(q: int, rng: np.random.Generator) -> int:
    """Number of fresh uniform non-zero rows needed until the rank reaches ``q``."""
    state = DecoderState(session=0, q=q)
    mask = (1 << q) - 1
    nbytes = (q + 7) // 8
    k = 0
    while not can_decode(state):
        row = int.from_bytes(rng.bytes(nbytes), "little") & mask
        if not row:
            continue
        ingest(state, CodedPacket(0, 0, k, q, row))
        k += 1
    return k
