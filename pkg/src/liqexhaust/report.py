"""Aggregation of attack instances, parameter sweeps and result emission."""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from decimal import Decimal
from typing import IO, Iterable, Mapping, Sequence

from .engine import (
    AttackConfig,
    AttackInstanceResult,
    ByzantineImpact,
    as_route_index,
    population_std,
    result_to_dict,
    simulate_schedule,
)
from .errors import GridTooLarge
from .liquidity import LiquidityBook, WindowMode
from .strategies import AttackTrigger, TriggerConfig, detect_triggers, placed_triggers
from .trace_model import ZERO, MoneyUsd, money

RATIO_QUANTUM = Decimal("0.000001")
DEFAULT_GRID_CAP = 512


def _mean(values: Sequence[Decimal]) -> MoneyUsd:
    return money(sum(values, ZERO) / len(values)) if values else money(0)


def nearest_rank(values: Sequence, q: float):
    """Nearest-rank percentile: the ``ceil(q * n)``-th smallest value."""
    if not values:
        raise ValueError("percentile of an empty sequence")
    ordered = sorted(values)
    rank = max(1, math.ceil(Decimal(str(q)) * len(ordered)))
    return ordered[rank - 1]


def lower_median(values: Sequence):
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class ReliabilityRule:
    """An attack is called reliable when Pr[profit] reaches ``min_pr`` and the mean is positive."""

    min_pr: Decimal = Decimal("0.5")
    require_positive_mean: bool = True

    def __call__(self, pr_profit: Decimal, mean: MoneyUsd) -> bool:
        return pr_profit >= self.min_pr and (mean > 0 or not self.require_positive_mean)


DEFAULT_RELIABILITY = ReliabilityRule()


@dataclass(frozen=True)
class AggregateReport:
    fingerprint: str
    n_attacks: int
    mean_net_profit: MoneyUsd
    std_net_profit: MoneyUsd
    p90_net_profit: MoneyUsd
    pr_profit: Decimal
    mean_n_fulfillments: Decimal
    std_n_fulfillments: Decimal
    mean_volume_fulfilled: MoneyUsd
    std_volume_fulfilled: MoneyUsd
    reliable_attack: bool
    params: Mapping[str, str] = field(default_factory=dict, compare=False)


def aggregate(
    instances: Sequence[AttackInstanceResult],
    fingerprint: str = "",
    *,
    reliability: ReliabilityRule = DEFAULT_RELIABILITY,
    params: Mapping[str, str] | None = None,
) -> AggregateReport:
    """Distributional summary of rational instances; ± values are population std."""
    params = dict(params or {})
    n = len(instances)
    if n == 0:
        z = money(0)
        return AggregateReport(fingerprint, 0, z, z, z, Decimal(0), z, z, z, z, False, params)
    profits = [r.net_profit for r in instances]
    counts = [Decimal(r.n_fulfillments) for r in instances]
    volumes = [r.volume_fulfilled for r in instances]
    pr = (Decimal(sum(1 for p in profits if p > 0)) / n).quantize(RATIO_QUANTUM)
    mean = _mean(profits)
    return AggregateReport(
        fingerprint=fingerprint,
        n_attacks=n,
        mean_net_profit=mean,
        std_net_profit=population_std(profits),
        p90_net_profit=nearest_rank(profits, 0.9),
        pr_profit=pr,
        mean_n_fulfillments=_mean(counts),
        std_n_fulfillments=population_std(counts),
        mean_volume_fulfilled=_mean(volumes),
        std_volume_fulfilled=population_std(volumes),
        reliable_attack=reliability(pr, mean),
        params=params,
    )


BYZANTINE_METRICS = (
    "total_cost",
    "failed_value_median",
    "failed_value_std",
    "failed_intents",
    "missed_solver_profit",
    "missed_protocol_fees",
)


@dataclass(frozen=True)
class ByzantineReport:
    """Median and nearest-rank p90 of each byzantine metric across instances."""

    fingerprint: str
    n_attacks: int
    window: int
    median: Mapping[str, Decimal]
    p90: Mapping[str, Decimal]
    params: Mapping[str, str] = field(default_factory=dict, compare=False)


def aggregate_byzantine(
    impacts: Sequence[ByzantineImpact], fingerprint: str = "", *, window: int = 0, params=None
) -> ByzantineReport:
    if not impacts:
        zeros = {m: Decimal(0) for m in BYZANTINE_METRICS}
        return ByzantineReport(fingerprint, 0, window, zeros, dict(zeros), dict(params or {}))
    median, p90 = {}, {}
    for m in BYZANTINE_METRICS:
        vals = [Decimal(getattr(i, m)) for i in impacts]
        median[m] = lower_median(vals)
        p90[m] = nearest_rank(vals, 0.9)
    return ByzantineReport(fingerprint, len(impacts), impacts[0].window, median, p90, dict(params or {}))


# --- sweeps ---------------------------------------------------------------------

SWEEP_AXES = (
    "k",
    "attack_window",
    "override_solver_profit_pct",
    "override_protocol_fee_pct",
    "max_tx_value",
    "volume_multiplier",
)


@dataclass(frozen=True)
class SweepGrid:
    """Axis values to cross; ``None`` in an override axis means the historical value."""

    k: tuple[int, ...] = (1,)
    attack_window: tuple[int, ...] = (1000,)
    override_solver_profit_pct: tuple[Decimal | None, ...] = (None,)
    override_protocol_fee_pct: tuple[Decimal | None, ...] = (None,)
    max_tx_value: tuple[Decimal, ...] = (Decimal(10000),)
    volume_multiplier: tuple[Decimal, ...] = (Decimal(1),)
    cap: int = DEFAULT_GRID_CAP

    def __post_init__(self):
        for name in SWEEP_AXES:
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"sweep axis {name} is empty")
            object.__setattr__(self, name, values)
        if self.size > self.cap:
            raise GridTooLarge(f"grid has {self.size} cells, cap is {self.cap}")

    @property
    def size(self) -> int:
        return math.prod(len(getattr(self, a)) for a in SWEEP_AXES)

    def cells(self) -> list[dict]:
        return [dict(zip(SWEEP_AXES, combo)) for combo in itertools.product(*(getattr(self, a) for a in SWEEP_AXES))]


@dataclass(frozen=True)
class Schedule:
    """Where instances are placed: detected triggers, or fixed timestamps."""

    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    interval: tuple[int | None, int | None] | None = None
    placed_at: tuple[int, ...] | None = None

    def with_k(self, k: int) -> "Schedule":
        if self.placed_at is not None:
            return self
        t = self.trigger
        return Schedule(TriggerConfig(k, t.window_mode, t.cooldown_s, t.scope, t.intent_class, t.sample_resolution), self.interval)

    def triggers(self, book: LiquidityBook) -> list[AttackTrigger]:
        if self.placed_at is not None:
            return placed_triggers(book, self.placed_at)
        return detect_triggers(book, self.trigger, self.interval)

    def describe(self) -> dict[str, str]:
        if self.placed_at is not None:
            return {"schedule": "placed", "n_placed": str(len(self.placed_at))}
        t = self.trigger
        return {
            "schedule": "triggers",
            "k": str(t.k),
            "window_mode": WindowMode(t.window_mode).value,
            "trigger_scope": t.scope,
            "cooldown_s": str(t.cooldown_s),
            "sample_resolution": str(t.sample_resolution),
            "interval": "" if self.interval is None else f"{self.interval[0]}:{self.interval[1]}",
        }


def _fmt(v) -> str:
    if v is None:
        return "Real"
    if isinstance(v, Decimal):
        return format(v, "f")
    return str(v)


@dataclass(frozen=True)
class SweepCell:
    config: AttackConfig
    schedule: Schedule
    seed: int

    @property
    def params(self) -> dict[str, str]:
        c = self.config
        out = {
            "bridge": c.bridge,
            "route": f"{c.src_chain}->{c.dst_chain}",
            "mode": c.mode,
            "attack_window": str(c.attack_window),
            "solver_profit_pct": _fmt(c.override_solver_profit_pct),
            "protocol_fee_pct": _fmt(c.override_protocol_fee_pct),
            "max_tx_value": _fmt(c.max_tx_value),
            "volume_multiplier": _fmt(c.volume_multiplier),
            "seed": str(self.seed),
        }
        out.update(self.schedule.describe())
        return out

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint(seed=self.seed, **self.schedule.describe())


def run_cell(cell: SweepCell, records, book: LiquidityBook, triggers: Sequence[AttackTrigger] | None = None):
    if triggers is None:
        triggers = cell.schedule.triggers(book)
    fp = cell.fingerprint
    results = simulate_schedule(triggers, records, book, cell.config, seed=cell.seed, fingerprint=fp)
    if cell.config.mode == "byzantine":
        return aggregate_byzantine(results, fp, window=cell.config.attack_window, params=cell.params)
    return aggregate(results, fp, params=cell.params)


def _run_cell_batch(args):
    cells, records, book = args
    return [run_cell(c, records, book) for c in cells]


def build_cells(grid: SweepGrid, base: AttackConfig, schedule: Schedule, seed: int) -> list[SweepCell]:
    cells = []
    for values in grid.cells():
        k = values.pop("k")
        cfg = base.with_overrides(**values)
        cells.append(SweepCell(AttackConfig(**{f.name: getattr(cfg, f.name) for f in fields(cfg)}), schedule.with_k(k), seed))
    return cells


def run_sweep(
    grid: SweepGrid,
    records,
    book: LiquidityBook,
    base: AttackConfig,
    schedule: Schedule | None = None,
    *,
    seed: int = 0,
    workers: int = 1,
) -> list[tuple[SweepCell, AggregateReport | ByzantineReport]]:
    """One report per grid cell, sorted by fingerprint.

    Triggers are detected once per distinct ``k``. With ``workers > 1`` cells
    are spread over processes; results are identical to a serial run.
    """
    schedule = schedule or Schedule()
    index = as_route_index(records, base)
    cells = build_cells(grid, base, schedule, seed)
    if workers > 1 and len(cells) > 1:
        chunks = [cells[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = [r for batch in pool.map(_run_cell_batch, [(c, index.records, book) for c in chunks]) for r in batch]
        cells = [c for chunk in chunks for c in chunk]
    else:
        cache: dict[Schedule, list[AttackTrigger]] = {}
        reports = []
        for cell in cells:
            if cell.schedule not in cache:
                cache[cell.schedule] = cell.schedule.triggers(book)
            reports.append(run_cell(cell, index, book, cache[cell.schedule]))
    pairs = sorted(zip(cells, reports), key=lambda p: p[1].fingerprint)
    return pairs


# --- emission --------------------------------------------------------------------

REPORT_COLUMNS = (
    "fingerprint",
    "bridge",
    "route",
    "k",
    "attack_window",
    "solver_profit_pct",
    "protocol_fee_pct",
    "max_tx_value",
    "volume_multiplier",
    "n_attacks",
    "mean_n_fulfillments",
    "std_n_fulfillments",
    "mean_volume_fulfilled",
    "std_volume_fulfilled",
    "mean_net_profit",
    "std_net_profit",
    "p90_net_profit",
    "pr_profit",
    "reliable_attack",
)
BYZANTINE_COLUMNS = ("fingerprint", "bridge", "route", "attack_window", "n_attacks") + tuple(
    f"{stat}_{m}" for m in BYZANTINE_METRICS for stat in ("median", "p90")
)

FORMATS = ("csv", "jsonl", "table")


def _row(report) -> dict[str, str]:
    p = report.params
    if isinstance(report, ByzantineReport):
        row = {
            "fingerprint": report.fingerprint,
            "bridge": p.get("bridge", ""),
            "route": p.get("route", ""),
            "attack_window": str(report.window),
            "n_attacks": str(report.n_attacks),
        }
        for m in BYZANTINE_METRICS:
            row[f"median_{m}"] = _fmt(report.median[m])
            row[f"p90_{m}"] = _fmt(report.p90[m])
        return row
    row = {c: p.get(c, "") for c in REPORT_COLUMNS}
    for f in fields(report):
        if f.name in row:
            v = getattr(report, f.name)
            row[f.name] = ("yes" if v else "no") if isinstance(v, bool) else _fmt(v)
    return row


def _header_lines(meta: Mapping[str, object]) -> list[str]:
    return [f"# {k}={meta[k]}" for k in sorted(meta)]


def emit(reports: Iterable, fmt: str, fh: IO[str], *, meta: Mapping[str, object] | None = None, byzantine: bool = False) -> None:
    """Write reports sorted by fingerprint with a metadata header.

    ``csv`` and ``table`` put metadata on leading ``#`` lines; ``jsonl`` puts it
    in a first ``{"meta": ...}`` record. Output is byte-stable for fixed input.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    reports = sorted(reports, key=lambda r: r.fingerprint)
    if any(isinstance(r, ByzantineReport) for r in reports):
        byzantine = True
    columns = BYZANTINE_COLUMNS if byzantine else REPORT_COLUMNS
    rows = [_row(r) for r in reports]
    meta = {k: str(v) for k, v in (meta or {}).items()}
    if fmt == "jsonl":
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps({c: row.get(c, "") for c in columns}) + "\n")
        return
    for line in _header_lines(meta):
        fh.write(line + "\n")
    if fmt == "csv":
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.get(c, "") for c in columns])
        return
    table = [list(columns)] + [[row.get(c, "") for c in columns] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(columns))]
    for r in table:
        fh.write("  ".join(cell.rjust(w) if j else cell.ljust(w) for j, (cell, w) in enumerate(zip(r, widths))).rstrip() + "\n")


# --- per-instance export --------------------------------------------------------

INSTANCE_COLUMNS = tuple(f.name for f in fields(AttackInstanceResult))
_INT_FIELDS = {"t_s", "n_flood_intents", "n_fulfillments"}


def write_instances(results: Sequence[AttackInstanceResult], fh: IO[str], fmt: str = "csv") -> None:
    if fmt == "jsonl":
        for r in results:
            fh.write(json.dumps(result_to_dict(r)) + "\n")
        return
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(INSTANCE_COLUMNS)
    for r in results:
        d = result_to_dict(r)
        d["captured_intent_ids"] = " ".join(d["captured_intent_ids"])
        writer.writerow([d[c] for c in INSTANCE_COLUMNS])


def _instance_from_dict(d: Mapping) -> AttackInstanceResult:
    kwargs = {}
    for name in INSTANCE_COLUMNS:
        v = d[name]
        if name == "captured_intent_ids":
            kwargs[name] = tuple(v.split()) if isinstance(v, str) else tuple(v)
        elif name in _INT_FIELDS:
            kwargs[name] = int(v)
        else:
            kwargs[name] = Decimal(v)
    return AttackInstanceResult(**kwargs)


def read_instances(fh: IO[str], fmt: str = "csv") -> list[AttackInstanceResult]:
    if fmt == "jsonl":
        return [_instance_from_dict(json.loads(line)) for line in fh if line.strip()]
    return [_instance_from_dict(row) for row in csv.DictReader(fh)]


def write_byzantine_instances(impacts: Sequence[ByzantineImpact], fh: IO[str]) -> None:
    cols = [f.name for f in fields(ByzantineImpact) if f.name != "failed_intent_ids"]
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(cols)
    for imp in impacts:
        d = asdict(imp)
        writer.writerow([_fmt(d[c]) for c in cols])


# --- plot series ----------------------------------------------------------------


def emit_plot_series(
    book: LiquidityBook,
    triggers: Sequence[AttackTrigger],
    fh: IO[str],
    *,
    resolution: int = 60,
    interval: tuple[int, int] | None = None,
) -> None:
    """``t_s,liquidity,trigger`` rows on a regular grid, for external plotting.

    Trigger times are always included as rows with ``trigger=1`` even when
    they fall between grid points.
    """
    from .liquidity import total_liquidity

    if not book:
        fh.write("t_s,liquidity,trigger\n")
        return
    start = max(s.start for s in book.values())
    end = max(s.end for s in book.values())
    t0, t1 = interval if interval is not None else (start, end)
    t0 = max(t0, start)
    marks = {tr.at for tr in triggers if t0 <= tr.at <= t1}
    grid = set(range(t0, t1 + 1, resolution)) | marks
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("t_s", "liquidity", "trigger"))
    for t in sorted(grid):
        writer.writerow((t, format(total_liquidity(book, t), "f"), 1 if t in marks else 0))


__all__ = [
    "AggregateReport",
    "ByzantineReport",
    "ReliabilityRule",
    "Schedule",
    "SweepCell",
    "SweepGrid",
    "aggregate",
    "aggregate_byzantine",
    "build_cells",
    "emit",
    "emit_plot_series",
    "nearest_rank",
    "read_instances",
    "run_cell",
    "run_sweep",
    "write_byzantine_instances",
    "write_instances",
]
