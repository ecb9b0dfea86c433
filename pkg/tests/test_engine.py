from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_record
from liqexhaust.engine import (
    AttackConfig,
    RouteIndex,
    byzantine_attack,
    capture_intents,
    induction_cost,
    instance_seed,
    rational_attack,
    simulate_schedule,
)
from liqexhaust.errors import EmptyRoute
from liqexhaust.liquidity import LiquiditySeries
from liqexhaust.strategies import AttackTrigger
from liqexhaust.trace_model import SolverId

S = SolverId("0xa", "ethereum")
CFG = AttackConfig("solana", "ethereum", "debridge", attack_window=1000, flood_gas_usd=Decimal("0.2"))


def trig(at, alpha="1"):
    return AttackTrigger(at, Decimal(0), None, "placed", Decimal(alpha))


def book(balance="760000"):
    return {S: LiquiditySeries.flat(balance, 0, S)}


def test_zero_alpha_costs_nothing():
    assert induction_cost(0, 514_000, Decimal("0.013"), 10_000, 1)[:2] == (0, 0)


def test_full_drain_debridge_constants():
    c = induction_cost(1, 514_000, Decimal("0.013"), 10_000, 1)
    assert c.fee_component == Decimal("6682") and c.gas_component == 52
    assert c.cost == Decimal("6734") and c.n_flood_intents == 52


def test_targeted_mayan_arithmetic():
    c = induction_cost(Decimal("0.075"), 760_000, Decimal("0.00029"), 10_000, Decimal("0.20"))
    assert c.fee_component == Decimal("16.53") and c.gas_component == Decimal("1.20")
    assert c.n_flood_intents == 6 and c.cost == Decimal("17.73")
    assert c.drained == Decimal("57000")


def test_alpha_out_of_range():
    with pytest.raises(ValueError):
        induction_cost(Decimal("1.01"), 1, 0, 1, 0)


def test_one_intent_net_profit():
    recs = [make_record("x", "1000", 100, p="0.01129", gas="0.50")]
    cfg = CFG.with_overrides(override_protocol_fee_pct=Decimal("0.00029"))
    res = rational_attack(trig(100, "0.075"), recs, book(), cfg)
    assert res.induction_cost == Decimal("17.73")
    assert res.revenue == Decimal("11.29") and res.fill_cost == Decimal("0.50")
    assert res.net_profit == Decimal("-6.94")
    assert res.identity_residual() == 0
    assert res.working_capital == Decimal("57000")


def test_empty_window_is_pure_cost():
    recs = [make_record("x", "1000", 5000)]
    cfg = CFG.with_overrides(epsilon_model="fixed", epsilon_value=Decimal("3"), override_protocol_fee_pct=Decimal("0.001"))
    res = rational_attack(trig(100), recs, book(), cfg)
    assert (res.revenue, res.fill_cost, res.n_fulfillments) == (0, 0, 0)
    assert res.net_profit == -(res.induction_cost + 3)


def test_empty_route():
    with pytest.raises(EmptyRoute):
        rational_attack(trig(0), [make_record(bridge="mayan")], book(), CFG)


def test_epsilon_bps_of_drained_capital():
    cfg = CFG.with_overrides(epsilon_model="bps", epsilon_value=Decimal(2), override_protocol_fee_pct=Decimal(0))
    res = rational_attack(trig(0), [make_record()], book("10000"), cfg)
    assert res.epsilon == Decimal(2)


def test_flood_gas_defaults_to_trailing_median():
    recs = [make_record(f"r{i}", "10", i * 100, gas=str(g)) for i, g in enumerate([1, 9, 3, 5, 7])]
    cfg = AttackConfig("solana", "ethereum", "debridge", flood_gas_usd=None, override_protocol_fee_pct=Decimal(0))
    idx = RouteIndex(recs, cfg.route)
    assert idx.flood_gas_at(450) == Decimal(5)
    assert idx.flood_gas_at(150) == Decimal(1)  # lower median of {1, 9}
    assert idx.flood_gas_at(0) == Decimal(5)  # nothing before: whole route
    res = rational_attack(trig(10_000), idx, book("25000"), cfg)
    assert res.n_flood_intents == 3 and res.induction_cost == Decimal(15)


def test_capture_multipliers():
    recs = [make_record(f"r{i}", "1", i) for i in range(3)]
    assert capture_intents(recs, 0, 10, 1) == recs
    doubled = capture_intents(recs, 0, 10, 2)
    assert len(doubled) == 6 and all(doubled.count(r) == 2 for r in recs)
    assert capture_intents(recs, 1, 1, 1) == [recs[1]]


def test_half_multiplier_subsamples():
    recs = [make_record(f"r{i}", "2", i) for i in range(10_000)]
    half = capture_intents(recs, 0, 10_000, Decimal("0.5"), seed=42)
    assert abs(len(half) - 5000) <= 200
    assert half == capture_intents(recs, 0, 10_000, Decimal("0.5"), seed=42)
    assert abs(sum(r.intent_value for r in half) - 10_000) <= 400


def test_byzantine_hand_window():
    recs = [make_record(str(v), str(v), 10 + i, p="0.01", fee="0.001") for i, v in enumerate((100, 300, 500))]
    cfg = CFG.with_overrides(mode="byzantine", override_protocol_fee_pct=Decimal("0.01"))
    imp = byzantine_attack(trig(0), recs, book("1000"), cfg)
    assert imp.failed_intents == 3
    assert imp.missed_solver_profit == Decimal("9.00")
    assert imp.failed_value_median == Decimal(300)
    assert imp.missed_protocol_fees == Decimal("0.9")
    assert imp.failed_value_total == 900
    assert imp.total_cost == Decimal("10.2")  # 1% of 1000 plus one flood intent


def test_byzantine_empty_window_only_costs():
    imp = byzantine_attack(trig(10**6), [make_record()], book("1000"), CFG.with_overrides(mode="byzantine"))
    assert imp.failed_intents == 0 and imp.failed_value_total == 0 and imp.missed_solver_profit == 0
    assert imp.total_cost > 0


def test_byzantine_ignores_multiplier_and_alpha():
    recs = [make_record("a", "100", 5)]
    cfg = CFG.with_overrides(mode="byzantine", volume_multiplier=3)
    assert byzantine_attack(trig(0, "0.1"), recs, book("1000"), cfg).failed_intents == 1


def test_instance_seed_is_stable():
    assert instance_seed(1, 2, "ab") == instance_seed(1, 2, "ab") != instance_seed(1, 3, "ab")


def test_config_validation_and_fingerprint():
    with pytest.raises(ValueError):
        AttackConfig("a", "b", "c", attack_window=0)
    with pytest.raises(ValueError):
        AttackConfig("a", "b", "c", volume_multiplier=0)
    with pytest.raises(ValueError):
        AttackConfig("a", "b", "c", max_tx_value=0)
    a = AttackConfig("Solana", "ethereum", "deBridge")
    assert a == AttackConfig("solana", "ethereum", "debridge")
    assert a.fingerprint() == AttackConfig("solana", "ethereum", "debridge").fingerprint()
    assert a.fingerprint() != a.with_overrides(attack_window=600).fingerprint()


values = st.decimals(min_value=0, max_value=100_000, places=6, allow_nan=False, allow_infinity=False)
pcts = st.decimals(min_value=Decimal("-0.01"), max_value=Decimal("0.05"), places=8, allow_nan=False, allow_infinity=False)


@st.composite
def window(draw):
    n = draw(st.integers(0, 25))
    return [
        make_record(f"r{i}", str(draw(values)), draw(st.integers(0, 2000)), p=str(draw(pcts)), gas=str(draw(values) / 1000))
        for i in range(n)
    ] or [make_record("far", "1", 10**7)]


@settings(max_examples=80, deadline=None)
@given(window(), st.integers(0, 1500), st.sampled_from([200, 600, 1000]), st.decimals(0, 1, places=4))
def test_identity_and_override_neutrality(recs, t, w, alpha):
    cfg = CFG.with_overrides(attack_window=w)
    res = rational_attack(trig(t, str(alpha)), recs, book(), cfg)
    assert res.identity_residual() == 0
    captured = [r for r in recs if t <= r.created_at < t + w]
    assert res.volume_fulfilled == sum((r.intent_value for r in captured), Decimal(0))
    if captured and len({r.solver_profit_pct for r in captured}) == 1:
        same = cfg.with_overrides(override_solver_profit_pct=captured[0].solver_profit_pct)
        assert rational_attack(trig(t, str(alpha)), recs, book(), same).revenue == res.revenue


@settings(max_examples=60, deadline=None)
@given(window(), st.integers(0, 1500), st.integers(2, 5))
def test_integer_multiplier_is_linear(recs, t, m):
    one = rational_attack(trig(t), recs, book(), CFG)
    many = rational_attack(trig(t), recs, book(), CFG.with_overrides(volume_multiplier=m))
    assert many.revenue == m * one.revenue
    assert many.fill_cost == m * one.fill_cost
    assert many.volume_fulfilled == m * one.volume_fulfilled
    assert many.induction_cost == one.induction_cost


@settings(max_examples=60, deadline=None)
@given(window(), st.integers(0, 1500), pcts, pcts)
def test_profit_monotone_in_margin_override(recs, t, p1, p2):
    lo, hi = sorted((p1, p2))
    a = rational_attack(trig(t), recs, book(), CFG.with_overrides(override_solver_profit_pct=lo))
    b = rational_attack(trig(t), recs, book(), CFG.with_overrides(override_solver_profit_pct=hi))
    assert a.net_profit <= b.net_profit


@settings(max_examples=60, deadline=None)
@given(window(), st.integers(0, 1500))
def test_window_monotone(recs, t):
    cfg = CFG.with_overrides(mode="byzantine")
    prev = None
    for w in (200, 600, 1000):
        imp = byzantine_attack(trig(t), recs, book(), cfg.with_overrides(attack_window=w))
        rat = rational_attack(trig(t), recs, book(), CFG.with_overrides(attack_window=w))
        if prev:
            assert imp.failed_intents >= prev[0].failed_intents
            assert rat.volume_fulfilled >= prev[1].volume_fulfilled
            assert imp.total_cost == prev[0].total_cost
        prev = (imp, rat)


def test_simulate_schedule_dispatch():
    recs = [make_record("a", "100", 5)]
    triggers = [trig(0), trig(2000)]
    rational = simulate_schedule(triggers, recs, book(), CFG, seed=3)
    byz = simulate_schedule(triggers, recs, book(), CFG.with_overrides(mode="byzantine"), seed=3)
    assert [r.n_fulfillments for r in rational] == [1, 0]
    assert [b.failed_intents for b in byz] == [1, 0]
