from __future__ import annotations

import io
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liqexhaust.errors import InsufficientHistory
from liqexhaust.liquidity import IntentClass, IntentCriteria, LiquiditySeries, WindowMode
from liqexhaust.strategies import (
    SCOPE_CLASS,
    SCOPE_PER_SOLVER,
    TriggerConfig,
    _scan_below_threshold,
    detect_triggers,
    placed_triggers,
    targeted_triggers,
    uniform_times,
    write_schedule,
)
from liqexhaust.trace_model import SolverId

A = SolverId("0xa", "ethereum")
B = SolverId("0xb", "ethereum")


def dip_series():
    """1000/1100 alternating (median 1000, sigma 50) then one sample at 900."""
    pts = [(i * 60, 1000 if i % 2 == 0 else 1100) for i in range(100)]
    pts += [(6000, 900), (6060, 1000)]
    return LiquiditySeries.from_points(pts, A)


def test_constant_series_never_triggers():
    book = {A: LiquiditySeries.flat(500, 0, A)}
    assert detect_triggers(book, TriggerConfig(k=0), (120, 6000)) == []


def test_single_dip_one_trigger():
    book = {A: dip_series()}
    trig = detect_triggers(book, TriggerConfig(k=1), (120, 6060))
    assert [t.at for t in trig] == [6000]
    assert trig[0].liquidity_at_trigger == 900
    assert trig[0].threshold == Decimal(950)
    assert trig[0].alpha == 1 and trig[0].total_liquidity == 900
    # 900 equals median - 2 sigma: the strict inequality does not fire
    assert detect_triggers(book, TriggerConfig(k=2), (120, 6060)) == []


def test_trace_start_lacks_history():
    with pytest.raises(InsufficientHistory):
        detect_triggers({A: dip_series()}, TriggerConfig(k=1), (0, 600))


def test_class_with_every_solver_reduces_to_baseline():
    book = {A: dip_series(), B: LiquiditySeries.flat(0, 0, B)}
    cls = IntentClass(IntentCriteria("mayan"), frozenset({A, B}))
    base = detect_triggers(book, TriggerConfig(k=1), (120, 6060))
    targeted = targeted_triggers(book, cls, TriggerConfig(k=1, scope=SCOPE_CLASS, intent_class=cls), (120, 6060))
    assert [(t.at, t.alpha) for t in targeted] == [(t.at, t.alpha) for t in base]


def test_targeted_alpha_is_share_of_total():
    book = {A: dip_series(), B: LiquiditySeries.flat(8100, 0, B)}
    cls = IntentClass(IntentCriteria("mayan"), frozenset({A}))
    trig = detect_triggers(book, TriggerConfig(k=1, scope=SCOPE_CLASS, intent_class=cls), (120, 6060))
    assert len(trig) == 1
    assert trig[0].alpha == Decimal(900) / Decimal(9000)
    assert trig[0].total_liquidity == 9000


def test_per_solver_scope_labels_solver():
    noisy = LiquiditySeries.from_points([(i * 60, 0 if i % 2 == 0 else 10_000) for i in range(102)], B)
    book = {A: dip_series(), B: noisy}
    assert detect_triggers(book, TriggerConfig(k=1), (120, 6060)) == []
    trig = detect_triggers(book, TriggerConfig(k=1, scope=SCOPE_PER_SOLVER), (120, 6060))
    assert [t.scope for t in trig] == [f"per-solver:{A}"]


def test_full_period_sees_the_future():
    pts = [(i * 60, 100) for i in range(40)] + [(2400 + i * 60, 10_000) for i in range(60)]
    s = LiquiditySeries.from_points(pts, A)
    full = detect_triggers({A: s}, TriggerConfig(k=0, window_mode=WindowMode.FULL, cooldown_s=0))
    causal = detect_triggers({A: s}, TriggerConfig(k=0, cooldown_s=0), (120, None))
    assert full and full[0].at == 0
    assert causal == []


def test_config_validation():
    with pytest.raises(ValueError):
        TriggerConfig(k=-1)
    with pytest.raises(ValueError):
        TriggerConfig(scope=SCOPE_CLASS)
    with pytest.raises(ValueError):
        TriggerConfig(scope="galaxy")


def test_placed_and_uniform():
    book = {A: dip_series()}
    trig = placed_triggers(book, [6000, 60, 60])
    assert [(t.at, t.threshold, t.liquidity_at_trigger) for t in trig] == [(60, None, 1100), (6000, None, 900)]
    times = uniform_times(0, 10_000, 20, spacing=300, seed=1)
    assert len(times) == 20 and times == sorted(times)
    assert all(b - a >= 300 for a, b in zip(times, times[1:]))
    assert uniform_times(0, 10_000, 20, spacing=300, seed=1) == times


def test_schedule_file():
    buf = io.StringIO()
    write_schedule(detect_triggers({A: dip_series()}, TriggerConfig(k=1), (120, 6060)), buf)
    assert buf.getvalue() == "t_s,liquidity,threshold,alpha,scope\n6000,900.000000,950.000000,1,total\n"


random_walks = st.lists(st.integers(-400, 400), min_size=10, max_size=300)


def walk(steps, seed_level=5000):
    level, pts = seed_level, []
    for i, s in enumerate(steps):
        level = max(0, level + s)
        pts.append((i * 60, level))
    return LiquiditySeries.from_points(pts, A)


@settings(max_examples=80, deadline=None)
@given(random_walks, st.sampled_from([0, 60, 300, 1000]))
def test_count_non_increasing_in_k(steps, cooldown):
    book = {A: walk(steps)}
    counts = [len(detect_triggers(book, TriggerConfig(k=k, cooldown_s=cooldown))) for k in range(5)]
    assert counts == sorted(counts, reverse=True)


@settings(max_examples=60, deadline=None)
@given(random_walks)
def test_trigger_sets_nest_without_cooldown(steps):
    book = {A: walk(steps)}
    sets = [{t.at for t in detect_triggers(book, TriggerConfig(k=k, cooldown_s=0))} for k in range(4)]
    for lo, hi in zip(sets, sets[1:]):
        assert hi <= lo


@settings(max_examples=60, deadline=None)
@given(random_walks, st.integers(1, 2000))
def test_triggers_respect_cooldown_and_threshold(steps, cooldown):
    trig = detect_triggers({A: walk(steps)}, TriggerConfig(k=1, cooldown_s=cooldown))
    assert all(b.at - a.at >= cooldown for a, b in zip(trig, trig[1:]))
    assert all(t.liquidity_at_trigger < t.threshold for t in trig)


@settings(max_examples=40, deadline=None)
@given(random_walks, st.integers(0, 299))
def test_causal_scan_ignores_future(steps, cut):
    series = walk(steps)
    cut_at = min(cut, len(steps) - 1) * 60
    truncated = LiquiditySeries.from_points([p for p in series.points if p[0] <= cut_at], A)
    full = _scan_below_threshold(series, 1, WindowMode.CAUSAL, 60, None, cut_at, "x")
    part = _scan_below_threshold(truncated, 1, WindowMode.CAUSAL, 60, None, cut_at, "x")
    assert full == part
