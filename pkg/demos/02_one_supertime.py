# # A single supertime slot, step by step
#
# The engine runs broadcast, deletion and receiving phases back to back.  Here
# we drive the phases by hand on a modest network and look at what each one
# leaves behind.

# +
import numpy as np

from dcmcast.protocol import (DeliveryLedger, SimConfig, World, phase_broadcast, phase_deletion, phase_receiving,
                              plan_supertime)
from dcmcast.wireless import AuditLog

cfg = SimConfig(n_s=200, p=10, D=100, mobility="walk", seed=1)
plan = plan_supertime(cfg)
print("Q =", plan.Q)
print("broadcast grid %d x %d, receive grid %d x %d" % (plan.broadcast_grid.g, plan.broadcast_grid.g,
                                                        plan.receive_grid.g, plan.receive_grid.g))
print("colors: broadcast %d, receive %d (x2 sub-slots)" % (plan.broadcast_coloring.period,
                                                           plan.receive_coloring.period))
# -

# +
rng = np.random.default_rng(cfg.seed)
world = World.create(cfg, rng, audit=AuditLog(cfg.delta))
ledger = DeliveryLedger(cfg.n_s, cfg.p, cfg.D)

phase_broadcast(world, plan, ledger, rng)
print("coded packets sent per source: mean %.1f of %d" % (world.next_index.mean(), cfg.D))
print("full-size broadcasts per source-slot: %.3f" % (world.full_broadcasts / world.source_slots))
print("duplicates in the network:", len(world.dup_carrier))
print("largest pile of one session on one relay:", world.max_duplicates_per_session())
print("already delivered during broadcast:", ledger.counts().sum())
# -

# Deletion keeps one random duplicate per (relay, session).

# +
phase_deletion(world, rng)
print("duplicates left:", len(world.dup_carrier), " max per (relay, session):",
      world.max_duplicates_per_session())
# -

# +
before = ledger.counts().copy()
phase_receiving(world, plan, ledger, rng)
gain = ledger.counts() - before
print("delivered in receiving phase: mean %.2f per destination" % gain.mean())
print("total distinct packets per destination: mean %.2f, worst session min %d" %
      (ledger.counts().mean(), ledger.counts().min(axis=1).min()))
print("audited slots %d, slots with a violation %d" % (world.audit.slots, world.audit.violation_count))
