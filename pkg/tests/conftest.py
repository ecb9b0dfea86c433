from __future__ import annotations

from decimal import Decimal

import pytest

from liqexhaust.trace_model import IntentRecord, SolverId

SOLVER = SolverId("0x555ce236c0220695b68341bc48c68d52210cc35b", "ethereum")


def make_record(
    intent_id="i1",
    value="100",
    created=0,
    *,
    p="0.01",
    gas="0",
    auction="0",
    fee="0",
    bridge="debridge",
    src="solana",
    dst="ethereum",
    token="USDC",
    solver=SOLVER,
    fulfilled=None,
    refunded=None,
):
    return IntentRecord(
        intent_id=intent_id,
        bridge=bridge,
        src_chain=src,
        dst_chain=dst,
        solver=solver,
        created_at=created,
        intent_value=Decimal(value),
        solver_profit_pct=Decimal(p),
        protocol_fee_pct=Decimal(fee),
        fill_gas=Decimal(gas),
        auction_cost=Decimal(auction),
        dst_token=token,
        fulfilled_at=fulfilled,
        refunded_at=refunded,
    )


@pytest.fixture
def record_factory():
    return make_record


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
