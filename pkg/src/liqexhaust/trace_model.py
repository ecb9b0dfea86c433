"""In-memory model of cross-chain intents, solvers and USD amounts.

Money is carried as :class:`decimal.Decimal` quantized to six places so that
ledger folds and profit identities are exact regardless of summation order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from typing import Any, Iterable, Mapping

from .errors import (
    DuplicateId,
    EmptyAddress,
    NegativeValue,
    RecordRejected,
    TimestampOrder,
    UnknownChain,
)

MoneyUsd = Decimal

MONEY_QUANTUM = Decimal("0.000001")
ZERO = Decimal("0")

KNOWN_CHAINS: frozenset[str] = frozenset(
    {
        "solana",
        "arbitrum",
        "ethereum",
        "base",
        "polygon",
        "bnb",
        "unichain",
        "optimism",
        "avalanche",
    }
)
_extra_chains: set[str] = set()

KNOWN_BRIDGES: frozenset[str] = frozenset({"mayan", "across", "debridge"})


def register_chain(name: str) -> str:
    """Admit an additional chain label beyond the built-in nine."""
    label = name.strip().lower()
    if not label:
        raise UnknownChain("empty chain label", field="chain")
    _extra_chains.add(label)
    return label


def is_known_chain(name: str) -> bool:
    return name in KNOWN_CHAINS or name in _extra_chains


def to_decimal(value: Any) -> Decimal:
    """Convert ints, strings, floats and Decimals without binary-float artifacts."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(repr(value))
    try:
        return Decimal(str(value).strip())
    except InvalidOperation as exc:
        raise ValueError(f"not a decimal number: {value!r}") from exc


def money(value: Any) -> MoneyUsd:
    """Quantize ``value`` to a USD amount with 6 decimal places, half-even."""
    d = to_decimal(value)
    if not d.is_finite():
        raise ValueError(f"money must be finite, got {value!r}")
    return d.quantize(MONEY_QUANTUM, rounding=ROUND_HALF_EVEN)


def money_sum(values: Iterable[Any]) -> MoneyUsd:
    total = ZERO
    for v in values:
        total += money(v)
    return money(total)


@dataclass(frozen=True, order=True)
class SolverId:
    """A solver account on one chain; addresses compare case-insensitively."""

    address: str
    chain: str

    def __post_init__(self):
        object.__setattr__(self, "address", self.address.strip().lower())
        object.__setattr__(self, "chain", self.chain.strip().lower())

    def __str__(self) -> str:
        return f"{self.address}@{self.chain}"


def normalize_solver(address: str, chain: str) -> SolverId:
    addr = (address or "").strip()
    if not addr:
        raise EmptyAddress("solver address is empty")
    return SolverId(addr, chain)


class EventKind(str, enum.Enum):
    FULFILLMENT_OUTFLOW = "fulfillment_outflow"
    REFUND_INFLOW = "refund_inflow"
    EXTERNAL_INJECTION = "external_injection"
    EXTERNAL_WITHDRAWAL = "external_withdrawal"


@dataclass(frozen=True)
class LiquidityEvent:
    solver: SolverId
    at: int
    delta: MoneyUsd
    kind: EventKind

    def __post_init__(self):
        kind = EventKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "delta", money(self.delta))
        if kind is EventKind.FULFILLMENT_OUTFLOW and self.delta >= 0:
            raise ValueError("fulfillment outflow must be negative")
        if kind in (EventKind.REFUND_INFLOW, EventKind.EXTERNAL_INJECTION) and self.delta <= 0:
            raise ValueError(f"{kind.value} must be positive")
        if kind is EventKind.EXTERNAL_WITHDRAWAL and self.delta > 0:
            raise ValueError("external withdrawal must not be positive")


@dataclass(frozen=True)
class IntentRecord:
    """One cross-chain intent and the economics observed for its fill.

    ``solver_profit_pct`` and ``protocol_fee_pct`` are fractions
    (0.01129 means 1.129%). ``fulfilled_at``/``refunded_at`` are ``None``
    when the intent was never filled or never refunded.
    """

    intent_id: str
    bridge: str
    src_chain: str
    dst_chain: str
    solver: SolverId | None
    created_at: int
    intent_value: MoneyUsd
    solver_profit_pct: Decimal = ZERO
    protocol_fee_pct: Decimal = ZERO
    protocol_fixed_fee: MoneyUsd = ZERO
    fill_gas: MoneyUsd = ZERO
    auction_cost: MoneyUsd = ZERO
    dst_token: str = ""
    fulfilled_at: int | None = None
    refunded_at: int | None = None
    same_chain_swap: bool = False
    raw: Mapping[str, str] = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        for name in ("intent_value", "protocol_fixed_fee", "fill_gas", "auction_cost"):
            v = getattr(self, name)
            if isinstance(v, Decimal) and v.is_finite():
                object.__setattr__(self, name, money(v))

    @property
    def route(self) -> tuple[str, str, str]:
        return (self.src_chain, self.dst_chain, self.bridge)

    @property
    def solver_revenue(self) -> MoneyUsd:
        return money(self.intent_value * self.solver_profit_pct)

    @property
    def protocol_fee(self) -> MoneyUsd:
        return money(self.intent_value * self.protocol_fee_pct + self.protocol_fixed_fee)


def _check_money(rec: IntentRecord, name: str, *, allow_negative: bool = False) -> None:
    value = getattr(rec, name)
    if not isinstance(value, Decimal) or not value.is_finite():
        raise RecordRejected(f"{name} is not a finite decimal", field=name, intent_id=rec.intent_id)
    if not allow_negative and value < 0:
        raise NegativeValue(f"{name} is negative ({value})", field=name, intent_id=rec.intent_id)


def validate_record(record: IntentRecord) -> IntentRecord:
    """Return ``record`` unchanged if every invariant holds, else raise.

    The raised :class:`RecordRejected` subclass names the invariant and field.
    Uniqueness of ``intent_id`` is a set-level check, see :func:`validate_unique`.
    """
    rid = record.intent_id
    if not rid:
        raise RecordRejected("intent_id is empty", field="intent_id")
    for name in ("src_chain", "dst_chain"):
        if not is_known_chain(getattr(record, name)):
            raise UnknownChain(f"unknown chain {getattr(record, name)!r}", field=name, intent_id=rid)
    if record.src_chain == record.dst_chain and not record.same_chain_swap:
        raise UnknownChain("source equals destination without same-chain flag", field="dst_chain", intent_id=rid)
    if record.solver is not None and not is_known_chain(record.solver.chain):
        raise UnknownChain(f"unknown solver chain {record.solver.chain!r}", field="solver", intent_id=rid)
    for name in ("intent_value", "protocol_fixed_fee", "fill_gas", "auction_cost", "protocol_fee_pct"):
        _check_money(record, name)
    _check_money(record, "solver_profit_pct", allow_negative=True)

    created, filled, refunded = record.created_at, record.fulfilled_at, record.refunded_at
    if filled is not None and filled < created:
        raise TimestampOrder("fulfilled_at precedes created_at", field="fulfilled_at", intent_id=rid)
    if refunded is not None:
        if refunded < created:
            raise TimestampOrder("refunded_at precedes created_at", field="refunded_at", intent_id=rid)
        if filled is not None and refunded < filled:
            raise TimestampOrder("refunded_at precedes fulfilled_at", field="refunded_at", intent_id=rid)
    return record


def validate_unique(records: Iterable[IntentRecord]) -> None:
    seen: set[str] = set()
    for rec in records:
        if rec.intent_id in seen:
            raise DuplicateId(f"duplicate intent_id {rec.intent_id!r}", field="intent_id", intent_id=rec.intent_id)
        seen.add(rec.intent_id)
