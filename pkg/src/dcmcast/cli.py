"""Command-line entry point: ``mcast-sim run|sweep|bounds|oracle``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import analysis, harness
from .wireless import write_violations_csv

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; we reserve 2 for runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mcast-sim", description="Delay-constrained multicast simulator and bound calculator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="simulate one configuration file")
    run.add_argument("--config", required=True, help="flat 'key = value' config file")
    run.add_argument("--seed", type=int, help="override the seed in the config")
    run.add_argument("--out", required=True, help="CSV output path")
    run.add_argument("--audit-out", help="write interference violations (if any) to this CSV")

    sweep = sub.add_parser("sweep", help="run a preset parameter sweep")
    sweep.add_argument("--preset", required=True, choices=["fig5", "fig6", "fig7"])
    sweep.add_argument("--mobility", default="all", choices=["iid", "walk", "waypoint", "all"])
    sweep.add_argument("--replicates", type=int, default=5)
    sweep.add_argument("--supertimes", type=int, default=10, help="supertime slots per replicate")
    sweep.add_argument("--seed", type=int, default=0, help="base seed")
    sweep.add_argument("--workers", type=int, help=f"worker processes (default: ${harness.THREADS_ENV} or all cores)")
    sweep.add_argument("--out", required=True)

    bounds = sub.add_parser("bounds", help="evaluate the capacity bounds and the heuristic")
    bounds.add_argument("--ns", type=int, required=True)
    bounds.add_argument("--p", type=int, required=True)
    bounds.add_argument("--d", type=float, required=True)
    bounds.add_argument("--t", type=float, default=1.0)
    bounds.add_argument("--w", type=float, default=1.0)
    bounds.add_argument("--delta", type=float, default=1.0)
    bounds.add_argument("--kappa", type=float, default=3.0)

    oracle = sub.add_parser("oracle", help="Monte Carlo oracles")
    osub = oracle.add_subparsers(dest="oracle", parser_class=_Parser)
    bb = osub.add_parser("balls-bins", help="non-empty bins after r rounds of m distinct throws")
    bb.add_argument("--bins", type=int, default=100)
    bb.add_argument("--m", type=int, default=10)
    bb.add_argument("--rounds", type=int, default=10)
    bb.add_argument("--trials", type=int, default=10_000)
    bb.add_argument("--delta", type=float, default=0.1)
    bb.add_argument("--seed", type=int, default=0)
    cl = osub.add_parser("cluster", help="crowded-destination frequency against its bound")
    cl.add_argument("--ns", type=int, default=100)
    cl.add_argument("--p", type=int, default=10)
    cl.add_argument("--gamma", type=float, default=0.05)
    cl.add_argument("--kappa", type=float, help="default: the smallest admissible value")
    cl.add_argument("--t", type=int, default=100)
    cl.add_argument("--trials", type=int, default=1000)
    cl.add_argument("--seed", type=int, default=0)
    return parser


def cmd_run(args) -> int:
    config = harness.load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    rec, result = harness.single_run_record(config)
    harness.emit_csv([rec], args.out)
    if args.audit_out:
        write_violations_csv(result.audit.violations if result.audit else [], args.audit_out)
    print(f"throughput {rec.throughput:.6g}  audit violations {rec.audit_violations}/{rec.audit_slots} slots")
    return EXIT_OK


def cmd_sweep(args) -> int:
    mobilities = harness.ALL_MOBILITY if args.mobility == "all" else (args.mobility,)
    spec = harness.preset_spec(args.preset, mobilities, args.replicates, args.supertimes, args.seed)
    records = harness.run_sweep(spec, args.workers)
    harness.emit_csv(records, args.out)
    failed = sum(not r.ok for r in records)
    print(f"{len(records)} rows written to {args.out} ({failed} errored)")
    for m in spec.mobilities:
        try:
            fit = harness.fit_alpha(records, m)
        except ValueError:
            continue
        print(f"{m}: alpha = {fit.alpha:.4f}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    params = analysis.BoundParams(args.ns, args.p, args.d, args.t, args.w, args.delta, args.kappa)
    regime = analysis.capacity_regime(params)
    print(f"t1 = {regime.t1:.6g}")
    print(f"t2 = {regime.t2:.6g}")
    print(f"regime = {regime.kind.value}")
    if regime.value is not None:
        print(f"value = {regime.value:.6g}")
    print(f"({regime.note})")
    print(f"lambda_no_relay = {analysis.lambda_ceiling_no_relay(params):.6g}")
    print(f"lambda_relay = {analysis.lambda_ceiling_relay(params):.6g}")
    h = analysis.heuristic_capacity(args.ns, args.p, args.d, args.w)
    print(f"heuristic = {h.capacity:.6g} (L1 = {h.L1:.4g}, L2 = {h.L2:.4g})")
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.oracle == "balls-bins":
        r = analysis.balls_bins_nonempty(args.bins, args.m, args.rounds, args.trials, args.delta, args.seed)
        print(f"closed form {r.expected:.6g}  mc mean {r.mc_mean:.6g} (sd {r.mc_std:.4g}, {r.trials} trials)")
        print(f"P(N >= (1-delta)E) = {r.concentration_freq:.4f}  chernoff floor {r.chernoff_floor:.4f}")
    elif args.oracle == "cluster":
        kappa = args.kappa if args.kappa is not None else analysis.kappa_min(args.gamma, args.ns, args.p)
        est = analysis.cluster_exceedance_mc(args.ns, args.p, args.gamma, kappa, args.t,
                                             analysis.OracleConfig(args.trials, seed=args.seed))
        print(f"kappa {kappa:.6g}  threshold {est.threshold:.4g}")
        print(f"E[Z]/T ~ {est.per_slot:.4g}  bound {est.bound / args.t:.4g}  "
              f"({'within' if est.within_bound else 'exceeds'} bound)")
        print(f"mean H {est.mean_h:.5g}  expected {est.expected_h:.5g}")
    else:
        raise UsageError("oracle: choose balls-bins or cluster")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "bounds": cmd_bounds, "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        if not argv:
            raise UsageError("a command is required")
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
    except UsageError as exc:
        if not argv:
            parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
