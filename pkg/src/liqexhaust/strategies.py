"""Attack scheduling from liquidity statistics.

An attack fires at a grid sample ``t`` when the observed liquidity is strictly
below ``median - k * std`` of the sampled history. The comparison is done on
exact integer moments (micro-USD), squaring both sides so no square root or
rounding enters the decision. After a trigger, further triggers are
suppressed for ``cooldown_s`` seconds; the greedy earliest-first scan keeps
the trigger count monotone in ``k``.
"""

from __future__ import annotations

import bisect
import csv
import random
from dataclasses import dataclass
from decimal import Decimal
from typing import IO, Iterable, Sequence

from .errors import InsufficientHistory, OutOfRange
from .liquidity import (
    DEFAULT_SAMPLE_RESOLUTION,
    IntentClass,
    LiquidityBook,
    LiquiditySeries,
    WindowMode,
    _micro_to_usd,
    _std_micros,
    effective_series,
    lower_median,
    sample_grid,
    sum_series,
    total_liquidity,
)
from .trace_model import MoneyUsd

SCOPE_TOTAL = "total"
SCOPE_PER_SOLVER = "per-solver"
SCOPE_CLASS = "class"


@dataclass(frozen=True)
class TriggerConfig:
    k: int = 1
    window_mode: WindowMode = WindowMode.CAUSAL
    cooldown_s: int = 1000
    scope: str = SCOPE_TOTAL
    intent_class: IntentClass | None = None
    sample_resolution: int = DEFAULT_SAMPLE_RESOLUTION

    def __post_init__(self):
        object.__setattr__(self, "window_mode", WindowMode(self.window_mode))
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("k must be a non-negative integer")
        if self.cooldown_s < 0:
            raise ValueError("cooldown must be non-negative")
        if self.scope not in (SCOPE_TOTAL, SCOPE_PER_SOLVER, SCOPE_CLASS):
            raise ValueError(f"unknown trigger scope {self.scope!r}")
        if self.scope == SCOPE_CLASS and self.intent_class is None:
            raise ValueError("class scope needs an intent class")


@dataclass(frozen=True)
class AttackTrigger:
    """When to attack and how much of the total liquidity must be drained.

    ``threshold`` is ``None`` for triggers placed at chosen timestamps rather
    than detected by the deviation rule.
    """

    at: int
    liquidity_at_trigger: MoneyUsd
    threshold: MoneyUsd | None
    scope: str
    alpha: Decimal = Decimal(1)
    total_liquidity: MoneyUsd | None = None

    def __post_init__(self):
        if not (0 <= self.alpha <= 1):
            raise ValueError(f"alpha {self.alpha} outside [0, 1]")


@dataclass(frozen=True)
class _Candidate:
    at: int
    liquidity: int  # micro-USD
    threshold: MoneyUsd
    label: str


def _scan_below_threshold(
    series: LiquiditySeries,
    k: int,
    mode: WindowMode,
    resolution: int,
    t0: int | None,
    t1: int | None,
    label: str,
) -> list[_Candidate]:
    if t1 is None:
        t1 = series.end
    times, vals = sample_grid(series, t1, resolution)
    if t0 is None:
        t0 = series.start + 2 * resolution if mode is WindowMode.CAUSAL else series.start
    first = bisect.bisect_left(times, t0)
    k2 = int(k) * int(k)
    out: list[_Candidate] = []

    if mode is WindowMode.FULL:
        _, full = sample_grid(series, series.end, resolution)
        if len(full) < 2:
            raise InsufficientHistory("full-period window has fewer than 2 samples")
        n, s1, s2 = len(full), sum(full), sum(v * v for v in full)
        med = lower_median(sorted(full))
        var_num = n * s2 - s1 * s1
        thr = _threshold(med, k, n, s1, s2)
        for j in range(first, len(times)):
            diff = med - vals[j]
            if diff > 0 and k2 * var_num < diff * diff * n * n:
                out.append(_Candidate(times[j], vals[j], thr, label))
        return out

    if first < len(times) and first < 2:
        raise InsufficientHistory(f"fewer than 2 samples before t={times[first]}")
    hist = sorted(vals[:first])
    n = first
    s1 = sum(hist)
    s2 = sum(v * v for v in hist)
    for j in range(first, len(times)):
        v = vals[j]
        med = hist[(n - 1) // 2]
        diff = med - v
        if diff > 0 and k2 * (n * s2 - s1 * s1) < diff * diff * n * n:
            out.append(_Candidate(times[j], v, _threshold(med, k, n, s1, s2), label))
        bisect.insort(hist, v)
        n += 1
        s1 += v
        s2 += v * v
    return out


def _threshold(med: int, k: int, n: int, s1: int, s2: int) -> MoneyUsd:
    return _micro_to_usd(Decimal(med) - int(k) * _std_micros(n, s1, s2))


def _apply_cooldown(cands: Iterable[_Candidate], cooldown_s: int) -> list[_Candidate]:
    kept: list[_Candidate] = []
    for c in sorted(cands, key=lambda c: (c.at, c.label)):
        if kept and (c.at <= kept[-1].at or c.at - kept[-1].at < cooldown_s):
            continue
        kept.append(c)
    return kept


def _ratio(part: MoneyUsd, whole: MoneyUsd) -> Decimal:
    if whole <= 0:
        return Decimal(1)
    return min(Decimal(1), part / whole)


def detect_triggers(
    series: LiquidityBook,
    config: TriggerConfig,
    interval: tuple[int | None, int | None] | None = None,
) -> list[AttackTrigger]:
    """Median-deviation triggers over ``interval`` (inclusive grid samples)."""
    if config.scope == SCOPE_CLASS:
        return targeted_triggers(series, config.intent_class, config, interval)
    if not series:
        return []
    t0, t1 = interval if interval is not None else (None, None)
    if config.scope == SCOPE_TOTAL:
        combined = sum_series(series[s] for s in sorted(series))
        cands = _scan_below_threshold(combined, config.k, config.window_mode, config.sample_resolution, t0, t1, SCOPE_TOTAL)
    else:
        cands = []
        for sid in sorted(series):
            cands.extend(
                _scan_below_threshold(
                    series[sid], config.k, config.window_mode, config.sample_resolution, t0, t1, f"{SCOPE_PER_SOLVER}:{sid}"
                )
            )
    out = []
    for c in _apply_cooldown(cands, config.cooldown_s):
        L = total_liquidity(series, c.at)
        out.append(AttackTrigger(c.at, _micro_to_usd(c.liquidity), c.threshold, c.label, Decimal(1), L))
    return out


def targeted_triggers(
    series: LiquidityBook,
    intent_class: IntentClass,
    config: TriggerConfig,
    interval: tuple[int | None, int | None] | None = None,
) -> list[AttackTrigger]:
    """Triggers on the class-effective liquidity; alpha = L_eff / L at each trigger."""
    eff = effective_series(series, intent_class)
    t0, t1 = interval if interval is not None else (None, None)
    cands = _scan_below_threshold(eff, config.k, config.window_mode, config.sample_resolution, t0, t1, SCOPE_CLASS)
    out = []
    for c in _apply_cooldown(cands, config.cooldown_s):
        L = total_liquidity(series, c.at)
        L_eff = _micro_to_usd(c.liquidity)
        out.append(AttackTrigger(c.at, L_eff, c.threshold, SCOPE_CLASS, _ratio(L_eff, L), L))
    return out


def placed_triggers(series: LiquidityBook, times: Iterable[int]) -> list[AttackTrigger]:
    """Untargeted triggers at caller-chosen timestamps (no deviation rule)."""
    out = []
    for t in sorted(set(times)):
        L = total_liquidity(series, t)
        out.append(AttackTrigger(t, L, None, "placed", Decimal(1), L))
    return out


def uniform_times(t0: int, t1: int, count: int, *, spacing: int = 0, seed: int = 0) -> list[int]:
    """``count`` distinct timestamps drawn uniformly from ``[t0, t1]``, at least ``spacing`` apart."""
    if t1 < t0:
        raise OutOfRange("empty placement interval")
    rng = random.Random(seed)
    picked: list[int] = []
    attempts = 0
    while len(picked) < count and attempts < count * 100:
        attempts += 1
        t = rng.randint(t0, t1)
        i = bisect.bisect_left(picked, t)
        if i > 0 and t - picked[i - 1] < max(spacing, 1):
            continue
        if i < len(picked) and picked[i] - t < max(spacing, 1):
            continue
        picked.insert(i, t)
    return picked


SCHEDULE_COLUMNS = ("t_s", "liquidity", "threshold", "alpha", "scope")


def write_schedule(triggers: Sequence[AttackTrigger], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SCHEDULE_COLUMNS)
    for tr in triggers:
        writer.writerow(
            [
                tr.at,
                format(tr.liquidity_at_trigger, "f"),
                "" if tr.threshold is None else format(tr.threshold, "f"),
                format(tr.alpha.quantize(Decimal("1e-12")), "f") if tr.alpha != 1 else "1",
                tr.scope,
            ]
        )
