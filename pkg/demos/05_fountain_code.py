# # How many coded packets does decoding need?
#
# Rows are uniform non-zero bit vectors.  A destination can decode once the
# rows it holds have full rank.

# +
import numpy as np

from dcmcast.fountain import DecoderState, can_decode, encode, ingest, packets_to_decode

pkts = encode(session=0, supertime=0, q=8, count=12, seed=3)
state = DecoderState(session=0, q=8)
for p in pkts:
    ingest(state, p)
    print(f"index {p.index:2d} row {p.row:08b} rank {state.rank}{'  decodable' if can_decode(state) else ''}")
# -

# Overhead beyond Q: each extra packet roughly halves the failure chance.

# +
rng = np.random.default_rng(0)
for q in (16, 64):
    extra = np.array([packets_to_decode(q, rng) for _ in range(5000)]) - q
    print(f"Q={q}: mean extra {extra.mean():.2f}, P(extra > 5) {np.mean(extra > 5):.4f}, "
          f"P(extra > 10) {np.mean(extra > 10):.4f}")
