"""Parameter sweeps, the scaling-coefficient fit, CSV output and config files."""

from __future__ import annotations

import csv
import enum
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .mobility import MobilityKind
from .protocol import Mode, SimConfig, data_packets_per_source, simulate
from .wireless import GridTooCoarse

log = logging.getLogger(__name__)

CSV_HEADER = ("preset", "swept_var", "value", "mobility", "replicate", "seed", "delivered_mean", "throughput")
THREADS_ENV = "MCAST_SIM_THREADS"
ALL_MOBILITY = tuple(k.value for k in MobilityKind)


class Preset(str, enum.Enum):
    FIG5 = "fig5"
    FIG6 = "fig6"
    FIG7 = "fig7"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str
    swept_var: str
    values: tuple
    fixed: dict = field(default_factory=dict)
    mobilities: tuple = ALL_MOBILITY
    replicates: int = 5
    supertime_count: int = 10
    base_seed: int = 0

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        vals = tuple(self.values)
        if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("swept values must be non-empty and strictly increasing")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "mobilities", tuple(MobilityKind.parse(m).value for m in self.mobilities))
        if self.swept_var not in SimConfig.field_names():
            raise ValueError(f"cannot sweep unknown config field {self.swept_var!r}")

    def config_for(self, value, mobility: str, seed: int) -> SimConfig:
        params = dict(self.fixed)
        params[self.swept_var] = value
        params.update(mobility=mobility, seed=seed, supertime_count=self.supertime_count)
        return SimConfig(**params)

    def points(self):
        """``(value, mobility, replicate)`` in output order."""
        for v in self.values:
            for m in self.mobilities:
                for r in range(self.replicates):
                    yield v, m, r


def preset_spec(name, mobilities=ALL_MOBILITY, replicates: int = 5, supertime_count: int = 10,
                base_seed: int = 0) -> ExperimentSpec:
    """The three preset sweeps (fig5: n_s, fig6: D, fig7: p; deadline 2D)."""
    preset = Preset(str(name).lower())
    common = dict(mobilities=tuple(mobilities), replicates=replicates, supertime_count=supertime_count,
                  base_seed=base_seed)
    if preset is Preset.FIG5:
        return ExperimentSpec(preset.value, "n_s", (200, 400, 600, 800, 1000), {"p": 10, "D": 100}, **common)
    if preset is Preset.FIG6:
        return ExperimentSpec(preset.value, "D", tuple(range(100, 401, 50)), {"n_s": 500, "p": 10}, **common)
    if preset is Preset.FIG7:
        return ExperimentSpec(preset.value, "p", tuple(range(4, 41, 4)), {"n_s": 500, "D": 100}, **common)
    raise ValueError("the custom preset has no built-in sweep")


def derive_seed(base_seed: int, preset: str, value, mobility: str, replicate: int) -> int:
    key = f"{preset}|{value}|{mobility}|{replicate}".encode()
    return (int(base_seed) ^ zlib.crc32(key)) & 0xFFFFFFFF


@dataclass
class RunRecord:
    preset: str
    swept_var: str
    value: float
    mobility: str
    replicate: int
    seed: int
    delivered_mean: float
    throughput: float
    # not part of the CSV schema
    n_s: Optional[int] = None
    p: Optional[int] = None
    D: Optional[int] = None
    audit_slots: int = 0
    audit_violations: int = 0
    max_duplicates: int = 0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def csv_row(self) -> tuple:
        return (self.preset, self.swept_var, _fmt(self.value), self.mobility, self.replicate, self.seed,
                _fmt(self.delivered_mean), _fmt(self.throughput))


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return f"{x:.6g}"


def run_point(spec: ExperimentSpec, value, mobility: str, replicate: int) -> RunRecord:
    seed = derive_seed(spec.base_seed, spec.preset, value, mobility, replicate)
    rec = RunRecord(spec.preset, spec.swept_var, value, mobility, replicate, seed, math.nan, math.nan)
    try:
        cfg = spec.config_for(value, mobility, seed)
        rec.n_s, rec.p, rec.D = cfg.n_s, cfg.p, cfg.D
        result = simulate(cfg)
    except (GridTooCoarse, ValueError, MemoryError) as exc:
        log.error("point %s=%s mobility=%s replicate=%d failed: %s", spec.swept_var, value, mobility, replicate, exc)
        rec.error = str(exc)
        return rec
    rec.delivered_mean = result.delivered_mean
    if cfg.mode == Mode.CODED.value:
        q = _q_of(cfg)
        rec.throughput = float(np.mean([q * r.decoded.mean() for r in result.reports]))
    else:
        rec.throughput = result.delivered_mean
    rec.audit_slots = result.audit_slots
    rec.audit_violations = result.audit_violations
    rec.max_duplicates = result.max_duplicates_after_deletion
    return rec


def _q_of(cfg: SimConfig) -> int:
    return data_packets_per_source(cfg.n_s, cfg.D)


def _run_star(args):
    return run_point(*args)


def worker_count(requested: Optional[int] = None) -> int:
    if requested is None:
        requested = int(os.environ.get(THREADS_ENV, "0") or 0)
    return requested if requested > 0 else (os.cpu_count() or 1)


def run_sweep(spec: ExperimentSpec, workers: Optional[int] = None) -> list[RunRecord]:
    """Run every (value, mobility, replicate) point; output order never depends on scheduling."""
    jobs = [(spec, v, m, r) for v, m, r in spec.points()]
    n = min(worker_count(workers), len(jobs))
    if n <= 1:
        return [_run_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_star, jobs))


@dataclass(frozen=True)
class AlphaFit:
    alpha: float
    x: np.ndarray               # per point model abscissa 2D * sqrt(2D / n_s)
    y: np.ndarray               # per point mean throughput
    residuals: np.ndarray       # per point (y - alpha x) / (alpha x)


def scaling_abscissa(n_s, D):
    """``2D * sqrt(2D / n_s)`` with ``2D`` the supertime length."""
    two_d = 2.0 * np.asarray(D, dtype=float)
    return two_d * np.sqrt(two_d / np.asarray(n_s, dtype=float))


def fit_alpha(records: Sequence[RunRecord], mobility: Optional[str] = None) -> AlphaFit:
    """Least squares through the origin of throughput against ``2D sqrt(2D / n_s)``."""
    recs = [r for r in records if r.ok and (mobility is None or r.mobility == MobilityKind.parse(mobility).value)]
    if not recs:
        raise ValueError("no records to fit")
    x_all = scaling_abscissa([r.n_s for r in recs], [r.D for r in recs])
    y_all = np.array([r.throughput for r in recs])
    if len(np.unique(x_all)) < 2:
        raise ValueError("fit needs at least two distinct model abscissae")
    sxx = float(np.dot(x_all, x_all))
    if sxx == 0:
        raise ValueError("degenerate fit: all abscissae are zero")
    alpha = float(np.dot(x_all, y_all)) / sxx
    xs = np.unique(x_all)[::-1]
    ys = np.array([y_all[x_all == x].mean() for x in xs])
    return AlphaFit(alpha, xs, ys, (ys - alpha * xs) / (alpha * xs))


@dataclass(frozen=True)
class PointSummary:
    value: float
    mobility: str
    mean: float
    sem: float
    n: int


def summarize(records: Iterable[RunRecord]) -> dict[tuple, PointSummary]:
    """Mean throughput and its standard error per (value, mobility)."""
    groups: dict[tuple, list[float]] = {}
    for r in records:
        if r.ok:
            groups.setdefault((r.value, r.mobility), []).append(r.throughput)
    out = {}
    for (v, m), ys in groups.items():
        arr = np.array(ys)
        sem = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        out[(v, m)] = PointSummary(v, m, float(arr.mean()), sem, len(arr))
    return out


def emit_csv(records: Sequence[RunRecord], path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in records:
                w.writerow(r.csv_row())
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def _num(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_csv(path) -> list[RunRecord]:
    """Parse a file written by :func:`emit_csv`. Preset points get their config fields back."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for row in reader:
            rec = RunRecord(row["preset"], row["swept_var"], _num(row["value"]), row["mobility"],
                            int(row["replicate"]), int(row["seed"]), float(row["delivered_mean"]),
                            float(row["throughput"]))
            if rec.preset in (Preset.FIG5.value, Preset.FIG6.value, Preset.FIG7.value):
                spec = preset_spec(rec.preset)
                params = dict(spec.fixed)
                params[spec.swept_var] = rec.value
                rec.n_s, rec.p, rec.D = params["n_s"], params["p"], params["D"]
            if math.isnan(rec.throughput):
                rec.error = "errored row"
            out.append(rec)
    return out


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def parse_config(text: str) -> SimConfig:
    """Parse flat ``key = value`` lines (``#`` starts a comment) into a :class:`SimConfig`."""
    types = {f.name: f.type for f in fields(SimConfig)}
    params = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        kind = types[key]
        if kind in ("int", int):
            params[key] = int(value)
        elif kind in ("float", float):
            params[key] = float(value)
        elif kind in ("bool", bool):
            if value.lower() not in _BOOL:
                raise ValueError(f"line {lineno}: {key} must be true or false")
            params[key] = _BOOL[value.lower()]
        else:
            params[key] = value
    missing = {"n_s", "p", "D"} - params.keys()
    if missing:
        raise ValueError(f"config is missing required keys: {', '.join(sorted(missing))}")
    return SimConfig(**params)


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(config: SimConfig) -> str:
    lines = []
    for f in fields(SimConfig):
        v = getattr(config, f.name)
        lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"


def single_run_record(config: SimConfig) -> tuple[RunRecord, "object"]:
    """Simulate one config and wrap it as a CUSTOM record."""
    result = simulate(config)
    throughput = result.delivered_mean
    if config.mode == Mode.CODED.value:
        throughput = float(np.mean([_q_of(config) * r.decoded.mean() for r in result.reports]))
    rec = RunRecord(Preset.CUSTOM.value, "none", 0, config.mobility, 0, config.seed, result.delivered_mean,
                    throughput, config.n_s, config.p, config.D, result.audit_slots, result.audit_violations,
                    result.max_duplicates_after_deletion)
    return rec, result


__all__ = [
    "CSV_HEADER", "ExperimentSpec", "Preset", "RunRecord", "AlphaFit", "PointSummary",
    "preset_spec", "derive_seed", "run_point", "run_sweep", "fit_alpha", "scaling_abscissa", "summarize",
    "emit_csv", "read_csv", "parse_config", "load_config", "format_config", "single_run_record", "worker_count",
]
