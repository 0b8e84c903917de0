"""Delay-constrained multicast in mobile ad hoc networks: simulator, bounds and oracles."""

from .analysis import (BoundParams, OracleConfig, Regime, balls_bins_nonempty, capacity_regime,
                       cluster_exceedance_mc, heuristic_capacity, kappa_min, lambda_ceiling_no_relay,
                       lambda_ceiling_relay)
from .fountain import CodedPacket, DecoderState, can_decode, encode, ingest
from .harness import ExperimentSpec, RunRecord, emit_csv, fit_alpha, preset_spec, run_sweep
from .mobility import MobilityKind, MobilitySpec, advance
from .protocol import SimConfig, plan_supertime, run_supertime, simulate
from .torus import CellGrid, Point, cell_of, torus_distance
from .wireless import TransmissionIntent, audit_slot, build_coloring, exclusion_disjointness

__version__ = "0.1.0"
