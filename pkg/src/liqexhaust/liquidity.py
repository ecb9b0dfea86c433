"""Per-solver liquidity reconstruction and historical statistics.

Series are stepwise constant between points. Statistics are computed over
balances sampled on a fixed grid anchored at the series start; the causal
window only ever sees grid samples strictly before the query time.
"""

from __future__ import annotations

import bisect
import enum
from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal, localcontext
from typing import Iterable, Mapping

from .errors import EmptyCompetingSet, InsufficientHistory, NegativeBalance, OutOfRange
from .trace_model import ZERO, IntentRecord, LiquidityEvent, MoneyUsd, SolverId, money

DEFAULT_SAMPLE_RESOLUTION = 60
MICROS = 1_000_000


class WindowMode(str, enum.Enum):
    CAUSAL = "causal-expanding"
    FULL = "full-period"


@dataclass(frozen=True)
class LiquiditySeries:
    """Balance-over-time ledger of one solver (or an aggregate when ``solver`` is None)."""

    solver: SolverId | None
    times: tuple[int, ...]
    balances: tuple[MoneyUsd, ...]

    def __post_init__(self):
        if not self.times or len(self.times) != len(self.balances):
            raise ValueError("series needs at least one point and matching balances")
        if any(b >= a for a, b in zip(self.times[1:], self.times[:-1])):
            raise ValueError("series times must be strictly increasing")

    @property
    def start(self) -> int:
        return self.times[0]

    @property
    def end(self) -> int:
        return self.times[-1]

    @property
    def origin_balance(self) -> MoneyUsd:
        return self.balances[0]

    @property
    def points(self) -> list[tuple[int, MoneyUsd]]:
        return list(zip(self.times, self.balances))

    def balance_at(self, t: int) -> MoneyUsd:
        i = bisect.bisect_right(self.times, t) - 1
        if i < 0:
            raise OutOfRange(f"t={t} precedes series start {self.start}")
        return self.balances[i]

    @classmethod
    def flat(cls, balance, start: int = 0, solver: SolverId | None = None) -> "LiquiditySeries":
        return cls(solver, (start,), (money(balance),))

    @classmethod
    def from_points(cls, points: Iterable[tuple[int, object]], solver: SolverId | None = None) -> "LiquiditySeries":
        pts = list(points)
        return cls(solver, tuple(int(t) for t, _ in pts), tuple(money(b) for _, b in pts))


LiquidityBook = Mapping[SolverId, LiquiditySeries]


def build_series(
    events: Iterable[LiquidityEvent],
    origin_balances: Mapping[SolverId, object] | None = None,
    *,
    start: int | None = None,
) -> dict[SolverId, LiquiditySeries]:
    """Replay events into per-solver series sharing a common start time.

    The start defaults to the earliest event (0 when there are none); every
    series opens there at its origin balance. Events on the same timestamp are
    netted before the non-negativity check.
    """
    origin_balances = origin_balances or {}
    by_solver: dict[SolverId, dict[int, Decimal]] = defaultdict(dict)
    first = None
    for ev in events:
        slot = by_solver[ev.solver]
        slot[ev.at] = slot.get(ev.at, ZERO) + ev.delta
        first = ev.at if first is None else min(first, ev.at)
    if start is None:
        start = first if first is not None else 0
    elif first is not None and first < start:
        raise OutOfRange(f"event at t={first} precedes series start {start}")

    out: dict[SolverId, LiquiditySeries] = {}
    for sid in sorted(set(by_solver) | set(origin_balances)):
        balance = money(origin_balances.get(sid, ZERO))
        if balance < 0:
            raise NegativeBalance(sid, start, balance)
        times = [start]
        balances = [balance]
        for at in sorted(by_solver.get(sid, {})):
            balance = balance + by_solver[sid][at]
            if balance < 0:
                raise NegativeBalance(sid, at, balance)
            if at == start:
                balances[0] = balance
            else:
                times.append(at)
                balances.append(balance)
        out[sid] = LiquiditySeries(sid, tuple(times), tuple(balances))
    return out


def sum_series(series: Iterable[LiquiditySeries]) -> LiquiditySeries:
    """Pointwise sum of several series, starting at the latest start."""
    series = list(series)
    if not series:
        raise ValueError("cannot sum an empty set of series")
    start = max(s.start for s in series)
    times = sorted({start} | {t for s in series for t in s.times if t > start})
    balances = []
    cursors = [bisect.bisect_right(s.times, start) - 1 for s in series]
    for t in times:
        total = ZERO
        for j, s in enumerate(series):
            i = cursors[j]
            while i + 1 < len(s.times) and s.times[i + 1] <= t:
                i += 1
            cursors[j] = i
            total += s.balances[i]
        balances.append(total)
    return LiquiditySeries(None, tuple(times), tuple(balances))


def total_liquidity(series: LiquidityBook | Iterable[LiquiditySeries], t: int) -> MoneyUsd:
    """L(t): sum of every solver's balance at ``t``."""
    values = series.values() if isinstance(series, Mapping) else series
    return money(sum((s.balance_at(t) for s in values), ZERO))


# --- sampling and statistics -------------------------------------------------


def sample_grid(series: LiquiditySeries, until: int, resolution: int = DEFAULT_SAMPLE_RESOLUTION) -> tuple[list[int], list[int]]:
    """Grid times ``start + j*resolution <= until`` and balances there, in micro-USD."""
    if resolution <= 0:
        raise ValueError("sample resolution must be positive")
    times: list[int] = []
    values: list[int] = []
    idx = 0
    n_pts = len(series.times)
    t = series.start
    while t <= until:
        while idx + 1 < n_pts and series.times[idx + 1] <= t:
            idx += 1
        times.append(t)
        values.append(int(series.balances[idx] * MICROS))
        t += resolution
    return times, values


@dataclass(frozen=True)
class LiquidityStats:
    solver: SolverId | None
    as_of: int
    median: MoneyUsd
    std: MoneyUsd
    window: WindowMode
    n_samples: int


def _micro_to_usd(v) -> MoneyUsd:
    return money(Decimal(v) / MICROS)


def _std_micros(n: int, s1: int, s2: int) -> Decimal:
    """Population standard deviation (micro-USD) from exact integer moments."""
    num = n * s2 - s1 * s1
    with localcontext() as ctx:
        ctx.prec = 60
        return (Decimal(num) / Decimal(n * n)).sqrt()


def lower_median(sorted_values: list) -> object:
    return sorted_values[(len(sorted_values) - 1) // 2]


def stats_at(
    series: LiquiditySeries,
    t: int,
    window_mode: WindowMode | str = WindowMode.CAUSAL,
    sample_resolution: int = DEFAULT_SAMPLE_RESOLUTION,
) -> LiquidityStats:
    """Median (lower middle element) and population std of sampled balances.

    Causal mode uses grid samples in ``[start, t)``; full-period mode uses every
    grid sample up to the last point of the series.
    """
    mode = WindowMode(window_mode)
    if mode is WindowMode.CAUSAL:
        if t < series.start:
            raise OutOfRange(f"t={t} precedes series start {series.start}")
        _, vals = sample_grid(series, t - 1, sample_resolution)
    else:
        _, vals = sample_grid(series, series.end, sample_resolution)
    if len(vals) < 2:
        raise InsufficientHistory(f"{len(vals)} samples before t={t}; need at least 2")
    s1 = sum(vals)
    s2 = sum(v * v for v in vals)
    vals.sort()
    return LiquidityStats(
        solver=series.solver,
        as_of=t,
        median=_micro_to_usd(lower_median(vals)),
        std=_micro_to_usd(_std_micros(len(vals), s1, s2)),
        window=mode,
        n_samples=len(vals),
    )


# --- intent classes and effective liquidity ----------------------------------


@dataclass(frozen=True)
class IntentCriteria:
    """Selects intents by bridge, destination token and a half-open value band."""

    bridge: str
    token: str = "*"
    value_min: MoneyUsd | None = None
    value_max: MoneyUsd | None = None

    def __post_init__(self):
        if self.value_min is not None:
            object.__setattr__(self, "value_min", money(self.value_min))
        if self.value_max is not None:
            object.__setattr__(self, "value_max", money(self.value_max))
        if self.value_min is not None and self.value_max is not None and self.value_min >= self.value_max:
            raise ValueError("value_min must be below value_max")

    def matches(self, record: IntentRecord) -> bool:
        if record.bridge != self.bridge:
            return False
        if self.token != "*" and record.dst_token.upper() != self.token.upper():
            return False
        v = record.intent_value
        if self.value_min is not None and v < self.value_min:
            return False
        if self.value_max is not None and v >= self.value_max:
            return False
        return True


@dataclass(frozen=True)
class IntentClass:
    """An intent class together with the solvers that compete for it, S(c)."""

    criteria: IntentCriteria
    competing: frozenset[SolverId]

    def __post_init__(self):
        object.__setattr__(self, "competing", frozenset(self.competing))
        if not self.competing:
            raise EmptyCompetingSet("an intent class needs at least one competing solver")


def effective_liquidity(series: LiquidityBook, intent_class: IntentClass, t: int) -> MoneyUsd:
    """L_eff(c, t): liquidity held by the solvers competing for the class."""
    return money(sum((s.balance_at(t) for sid, s in series.items() if sid in intent_class.competing), ZERO))


def effective_series(series: LiquidityBook, intent_class: IntentClass) -> LiquiditySeries:
    members = [s for sid, s in sorted(series.items()) if sid in intent_class.competing]
    if not members:
        raise EmptyCompetingSet("no competing solver has a liquidity series")
    return sum_series(members)


def infer_competing_set(
    records: Iterable[IntentRecord],
    criteria: IntentCriteria,
    *,
    window: tuple[int, int] | None = None,
) -> frozenset[SolverId]:
    """Solvers with at least one fill matching ``criteria`` inside ``window``.

    ``window`` is a half-open ``[t0, t1)`` interval on fill time; ``None``
    considers the whole trace.
    """
    found: set[SolverId] = set()
    for rec in records:
        if rec.solver is None or rec.fulfilled_at is None:
            continue
        if window is not None and not (window[0] <= rec.fulfilled_at < window[1]):
            continue
        if criteria.matches(rec):
            found.add(rec.solver)
    return frozenset(found)
