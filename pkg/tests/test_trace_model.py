from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_record
from liqexhaust.errors import EmptyAddress, NegativeValue, TimestampOrder, UnknownChain, DuplicateId
from liqexhaust.ingest import record_to_row, row_to_record
from liqexhaust.trace_model import (
    KNOWN_CHAINS,
    EventKind,
    LiquidityEvent,
    SolverId,
    money,
    money_sum,
    normalize_solver,
    register_chain,
    validate_record,
    validate_unique,
)


def test_fill_before_creation_is_rejected():
    rec = make_record(created=100, fulfilled=50)
    with pytest.raises(TimestampOrder) as exc:
        validate_record(rec)
    assert exc.value.invariant == "timestamp_order"
    assert exc.value.field == "fulfilled_at"


def test_refund_before_fill_is_rejected():
    with pytest.raises(TimestampOrder):
        validate_record(make_record(created=0, fulfilled=30, refunded=20))


def test_degenerate_zero_intent_is_accepted():
    rec = make_record(value="0", p="0", gas="0", fee="0")
    assert validate_record(rec) is rec


def test_loss_making_fill_is_accepted():
    rec = make_record(value="1000", p="-0.002")
    assert validate_record(rec) is rec
    assert rec.solver_revenue == Decimal("-2")


def test_negative_value_is_rejected():
    with pytest.raises(NegativeValue) as exc:
        validate_record(make_record(gas="-1"))
    assert exc.value.field == "fill_gas"


def test_unknown_chain_and_same_chain():
    with pytest.raises(UnknownChain):
        validate_record(make_record(src="narnia"))
    with pytest.raises(UnknownChain):
        validate_record(make_record(src="ethereum", dst="ethereum"))


def test_registered_chain_becomes_valid():
    register_chain("zksync")
    assert validate_record(make_record(src="zksync"))


def test_duplicate_ids():
    with pytest.raises(DuplicateId):
        validate_unique([make_record("a"), make_record("a")])


def test_mixed_case_addresses_collapse():
    a = normalize_solver("0xDfd122610A14Ac12D934898c02dBEc1f72708116", "ethereum")
    b = normalize_solver("0xdfd122610a14ac12d934898c02dbec1f72708116", "ethereum")
    assert a == b and hash(a) == hash(b)


def test_empty_address():
    with pytest.raises(EmptyAddress):
        normalize_solver("", "ethereum")
    with pytest.raises(EmptyAddress):
        normalize_solver("   ", "ethereum")


def test_same_address_on_two_chains_differs():
    addr = "0xdfd122610a14ac12d934898c02dbec1f72708116"
    assert normalize_solver(addr, "ethereum") != normalize_solver(addr, "base")


def test_event_sign_rules():
    sid = SolverId("0xabc", "ethereum")
    with pytest.raises(ValueError):
        LiquidityEvent(sid, 0, Decimal(5), EventKind.FULFILLMENT_OUTFLOW)
    with pytest.raises(ValueError):
        LiquidityEvent(sid, 0, Decimal(-5), EventKind.REFUND_INFLOW)
    assert LiquidityEvent(sid, 0, Decimal("-5.0000001"), "fulfillment_outflow").delta == Decimal("-5.000000")


def test_money_rejects_non_finite():
    with pytest.raises(ValueError):
        money(float("nan"))
    assert money(0.1) + money(0.2) == money("0.3")


_chains = st.sampled_from(sorted(KNOWN_CHAINS))
_money = st.decimals(min_value=0, max_value=10**9, places=6, allow_nan=False, allow_infinity=False)
_pct = st.decimals(min_value=-1, max_value=1, places=8, allow_nan=False, allow_infinity=False)


@st.composite
def records(draw):
    src, dst = draw(_chains), draw(_chains)
    created = draw(st.integers(0, 2**34))
    filled = draw(st.one_of(st.none(), st.integers(created, created + 10**6)))
    refunded = None
    if filled is not None:
        refunded = draw(st.one_of(st.none(), st.integers(filled, filled + 10**6)))
    solver = draw(st.one_of(st.none(), st.text("0123456789abcdefABCDEF", min_size=4, max_size=42).map(lambda s: SolverId("0x" + s, dst))))
    from liqexhaust.trace_model import IntentRecord

    return validate_record(
        IntentRecord(
            intent_id=draw(st.text("abcdefghij0123456789-", min_size=1, max_size=20)),
            bridge=draw(st.sampled_from(["mayan", "across", "debridge"])),
            src_chain=src,
            dst_chain=dst,
            same_chain_swap=src == dst,
            solver=solver,
            created_at=created,
            fulfilled_at=filled,
            refunded_at=refunded,
            intent_value=draw(_money),
            solver_profit_pct=draw(_pct),
            protocol_fee_pct=abs(draw(_pct)),
            protocol_fixed_fee=draw(_money),
            fill_gas=draw(_money),
            auction_cost=draw(_money),
            dst_token=draw(st.sampled_from(["USDC", "ETH", "USDT", ""])),
        )
    )


@given(records())
def test_row_round_trip(rec):
    assert validate_record(row_to_record(record_to_row(rec))) == rec


@given(st.lists(_money, max_size=40), st.randoms())
def test_money_sum_is_order_independent(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert money_sum(values) == money_sum(shuffled)
