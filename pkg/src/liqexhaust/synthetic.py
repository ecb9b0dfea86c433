"""Synthetic intent traces with a consistent solver liquidity ledger.

Intents arrive as a (optionally diurnally weighted) Poisson process with
log-normal USD values. Each intent is filled by an eligible solver that can
front its value; the solver is refunded ``value + profit`` after
``refund_delay_s``. Intents no solver can afford stay unfilled. Optional
periodic sweeps withdraw realized profit so balances stay stationary, and an
optional rebalance floor tops a solver back up to its starting balance when
it runs low (the top-up is withdrawn again by later sweeps).
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass, fields, replace
from decimal import Decimal
from pathlib import Path
from typing import Sequence

from .errors import InvalidProfile
from .trace_model import (
    ZERO,
    EventKind,
    IntentRecord,
    LiquidityEvent,
    MoneyUsd,
    SolverId,
    money,
    to_decimal,
)

# 2025-06-01T00:00:00Z
DEFAULT_START = 1_748_736_000
PCT_QUANTUM = Decimal("1e-10")


@dataclass(frozen=True)
class SolverSpec:
    """A synthetic solver: liquidity share, pick weight and participation pattern.

    ``value_min``/``value_max`` bound the intents it competes for (half-open),
    ``tokens`` restricts destination tokens, and ``active_from``/``active_until``
    are offsets in seconds from the trace start.
    """

    address: str
    share: Decimal
    weight: float = 1.0
    value_min: Decimal | None = None
    value_max: Decimal | None = None
    tokens: frozenset[str] | None = None
    active_from: int | None = None
    active_until: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "share", to_decimal(self.share))
        for name in ("value_min", "value_max"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, money(v))
        if self.tokens is not None:
            object.__setattr__(self, "tokens", frozenset(t.upper() for t in self.tokens))

    def competes(self, value: MoneyUsd, token: str, offset: int) -> bool:
        if self.value_min is not None and value < self.value_min:
            return False
        if self.value_max is not None and value >= self.value_max:
            return False
        if self.tokens is not None and token.upper() not in self.tokens:
            return False
        if self.active_from is not None and offset < self.active_from:
            return False
        if self.active_until is not None and offset >= self.active_until:
            return False
        return True


@dataclass(frozen=True)
class SyntheticProfile:
    bridge: str
    median_intent_value: MoneyUsd
    solver_profit_pct: Decimal
    protocol_fee_pct: Decimal
    total_liquidity: MoneyUsd
    n_solvers: int = 1
    intents_per_hour: float = 100.0
    refund_delay_s: int = 1000
    value_sigma: float = 1.5
    diurnal_peak: tuple[int, float] | None = None
    src_chain: str = "solana"
    dst_chain: str = "ethereum"
    fill_latency_s: int = 20
    fill_gas_usd: MoneyUsd = Decimal("0.5")
    auction_cost_usd: MoneyUsd = ZERO
    profit_dispersion: float = 0.25
    profit_sweep_s: int | None = 3600
    rebalance_floor: float | None = None
    tokens: tuple[tuple[str, float], ...] = (("USDC", 0.6), ("ETH", 0.3), ("USDT", 0.1))
    solvers: tuple[SolverSpec, ...] | None = None
    start: int = DEFAULT_START

    def __post_init__(self):
        for name in ("median_intent_value", "total_liquidity", "fill_gas_usd", "auction_cost_usd"):
            object.__setattr__(self, name, money(getattr(self, name)))
        for name in ("solver_profit_pct", "protocol_fee_pct"):
            object.__setattr__(self, name, to_decimal(getattr(self, name)))
        if self.solvers is not None:
            object.__setattr__(self, "solvers", tuple(self.solvers))
            object.__setattr__(self, "n_solvers", len(self.solvers))

    def validate(self) -> None:
        if self.n_solvers < 1:
            raise InvalidProfile("need at least one solver")
        positive = {
            "median_intent_value": self.median_intent_value,
            "total_liquidity": self.total_liquidity,
            "intents_per_hour": self.intents_per_hour,
            "refund_delay_s": self.refund_delay_s,
            "value_sigma": self.value_sigma,
        }
        for name, v in positive.items():
            if not v > 0:
                raise InvalidProfile(f"{name} must be positive, got {v}")
        if self.protocol_fee_pct < 0 or self.fill_gas_usd < 0 or self.auction_cost_usd < 0:
            raise InvalidProfile("fees and costs must be non-negative")
        if self.profit_sweep_s is not None and self.profit_sweep_s <= 0:
            raise InvalidProfile("profit sweep interval must be positive")
        if self.rebalance_floor is not None and not (0 < self.rebalance_floor <= 1):
            raise InvalidProfile("rebalance floor must be in (0, 1]")
        if not self.tokens or any(w <= 0 for _, w in self.tokens):
            raise InvalidProfile("token weights must be positive")
        if self.diurnal_peak is not None:
            hour, weight = self.diurnal_peak
            if not (0 <= hour < 24) or weight <= 0:
                raise InvalidProfile("diurnal peak needs an hour in [0, 24) and a positive weight")
        if self.solvers is not None and any(s.share < 0 for s in self.solvers):
            raise InvalidProfile("solver shares must be non-negative")

    def solver_specs(self) -> tuple[SolverSpec, ...]:
        if self.solvers is not None:
            return self.solvers
        share = Decimal(1) / self.n_solvers
        return tuple(SolverSpec(_synthetic_address(self.bridge, i), share) for i in range(self.n_solvers))


def _synthetic_address(bridge: str, i: int) -> str:
    import hashlib

    return "0x" + hashlib.sha256(f"{bridge}:{i}".encode()).hexdigest()[:40]


def _split_liquidity(total: MoneyUsd, specs: Sequence[SolverSpec]) -> list[MoneyUsd]:
    weight = sum((s.share for s in specs), ZERO)
    if weight <= 0:
        raise InvalidProfile("solver shares sum to zero")
    parts = [money(total * s.share / weight) for s in specs]
    parts[-1] = money(total - sum(parts[:-1], ZERO))
    if parts[-1] < 0:
        raise InvalidProfile("liquidity split left a negative remainder")
    return parts


# 4-hour peak window weighting of arrivals
_PEAK_HOURS = 4


def _rate_factor(profile: SyntheticProfile, t: float) -> float:
    if profile.diurnal_peak is None:
        return 1.0
    hour, weight = profile.diurnal_peak
    h = (t % 86_400) / 3600
    in_peak = (h - hour) % 24 < _PEAK_HOURS
    # normalize so the daily mean rate equals intents_per_hour
    mean = (_PEAK_HOURS * weight + (24 - _PEAK_HOURS)) / 24
    return (weight if in_peak else 1.0) / mean


def generate_synthetic(
    profile: SyntheticProfile, duration: int, seed: int
) -> tuple[list[IntentRecord], list[LiquidityEvent]]:
    """Generate ``duration`` seconds of intents and the matching liquidity events.

    Starting balances appear as ``external_injection`` events at
    ``profile.start`` and sum to ``profile.total_liquidity``. Refund inflows
    can fall after the end of the horizon.
    """
    profile.validate()
    if duration <= 0:
        raise InvalidProfile("duration must be positive")
    rng = random.Random(seed)
    specs = profile.solver_specs()
    dst = profile.dst_chain
    sids = [SolverId(s.address, dst) for s in specs]
    balances = _split_liquidity(profile.total_liquidity, specs)
    targets = list(balances)
    floor = None if profile.rebalance_floor is None else to_decimal(profile.rebalance_floor)
    unswept = [ZERO] * len(specs)
    topped_up = [ZERO] * len(specs)  # injected capital not yet withdrawn again

    events: list[LiquidityEvent] = [
        LiquidityEvent(sid, profile.start, bal, EventKind.EXTERNAL_INJECTION) for sid, bal in zip(sids, balances) if bal > 0
    ]
    records: list[IntentRecord] = []
    pending: list[tuple[int, int, int, MoneyUsd, MoneyUsd]] = []  # (time, seq, solver, amount, profit)
    seq = 0
    sweep_every = profile.profit_sweep_s
    next_sweep = profile.start + sweep_every if sweep_every else None

    def settle_until(t: int) -> None:
        nonlocal next_sweep
        while True:
            t_ref = pending[0][0] if pending else None
            if t_ref is not None and t_ref <= t and (next_sweep is None or t_ref <= next_sweep):
                at, _, i, amount, profit = heapq.heappop(pending)
                balances[i] += amount
                unswept[i] += profit
                events.append(LiquidityEvent(sids[i], at, amount, EventKind.REFUND_INFLOW))
            elif next_sweep is not None and next_sweep <= t:
                for i in range(len(specs)):
                    take = min(unswept[i], balances[i])
                    repay = min(topped_up[i], balances[i] - take - targets[i]) if topped_up[i] > 0 else ZERO
                    if repay > 0:
                        topped_up[i] -= repay
                        take += repay
                    if take > 0:
                        balances[i] -= take
                        events.append(LiquidityEvent(sids[i], next_sweep, -take, EventKind.EXTERNAL_WITHDRAWAL))
                    unswept[i] = ZERO
                next_sweep += sweep_every
            else:
                return

    token_names = [t for t, _ in profile.tokens]
    token_weights = [w for _, w in profile.tokens]
    weights = [max(s.weight, 0.0) for s in specs]
    peak = 1.0
    if profile.diurnal_peak is not None:
        peak = max(_rate_factor(profile, profile.diurnal_peak[0] * 3600.0), 1.0)
    base_rate = profile.intents_per_hour / 3600.0
    mu = math.log(float(profile.median_intent_value))
    pct = profile.solver_profit_pct
    end = profile.start + duration

    t = float(profile.start)
    n = 0
    while True:
        t += rng.expovariate(base_rate * peak)
        if t >= end:
            break
        if profile.diurnal_peak is not None and rng.random() * peak > _rate_factor(profile, t):
            continue
        created = int(t)
        value = money(rng.lognormvariate(mu, profile.value_sigma))
        token = rng.choices(token_names, token_weights)[0]
        p_i = (pct * to_decimal(1 + profile.profit_dispersion * rng.gauss(0.0, 1.0))).quantize(PCT_QUANTUM)
        gas = money(profile.fill_gas_usd * to_decimal(rng.lognormvariate(0.0, 0.3)))
        filled_at = created + profile.fill_latency_s
        settle_until(filled_at)

        offset = created - profile.start
        eligible = [
            i for i, s in enumerate(specs) if balances[i] >= value and weights[i] > 0 and s.competes(value, token, offset)
        ]
        solver = None
        fulfilled = refunded = None
        if eligible and value > 0:
            i = rng.choices(eligible, [weights[j] for j in eligible])[0]
            balances[i] -= value
            profit = money(value * p_i)
            events.append(LiquidityEvent(sids[i], filled_at, -value, EventKind.FULFILLMENT_OUTFLOW))
            if floor is not None and balances[i] < targets[i] * floor:
                top = targets[i] - balances[i]
                balances[i] += top
                topped_up[i] += top
                events.append(LiquidityEvent(sids[i], filled_at, top, EventKind.EXTERNAL_INJECTION))
            refunded = filled_at + profile.refund_delay_s
            refund = value + profit
            if refund > 0:
                heapq.heappush(pending, (refunded, seq, i, refund, profit))
            else:
                unswept[i] += profit
            seq += 1
            solver = sids[i]
            fulfilled = filled_at

        records.append(
            IntentRecord(
                intent_id=f"{profile.bridge}-{seed}-{n:08d}",
                bridge=profile.bridge,
                src_chain=profile.src_chain,
                dst_chain=dst,
                solver=solver,
                created_at=created,
                fulfilled_at=fulfilled,
                refunded_at=refunded,
                intent_value=value,
                solver_profit_pct=p_i,
                protocol_fee_pct=profile.protocol_fee_pct,
                fill_gas=gas,
                auction_cost=profile.auction_cost_usd,
                dst_token=token,
            )
        )
        n += 1

    # pay out every refund still in flight, without further sweeps
    next_sweep = None
    settle_until(math.inf)
    events.sort(key=lambda e: e.at)
    return records, events


# --- presets calibrated from the published per-protocol medians -------------

_MAYAN = (
    "0xdfd122610a14ac12d934898c02dbec1f72708116",
    "0x6ffc5848c46319e7c6d48f56ca2152b213d4535f",
    "0x466b037ace44c0134dcebd965a4a22aed6dea027",
    "0x7c825c6e7e4e1f618ca67e4943cdb41ca00b7f6b",
    "0x2977b8919df6a60e93089e0f4231a28899005302",
    "0x89c352c56c2caddbb4585731609802fb40867965",
    "0x38bf020e39e5a3ef1519c1283f6cac8a6b5851ff",
    "0xcbb0cb4492afbcd9963441cc6aea50f35807ff96",
)
_DEBRIDGE = (
    "0x555ce236c0220695b68341bc48c68d52210cc35b",
    "0x1c43ee851156a6ebc643b6a6b13413dcd479fc96",
    "0xc4eb49ea01578cb9b1c68ad27f457dbfa0bfbd97",
    "0x78b0f42536aeee037deedbb968ffb23cc2c0082e",
    "0x1155b614971f16758c92c4890ed338c9e3ede6b7",
    "0x7185b9c0c4ffa4eec6ecf100c5bc3583065002ab",
    "0x41bc52b02a0f7604cc6fb59ea49e261b60f3ec34",
    "0x98ab320ad1f8459d9ea2e83e1fc3ea80504f0eae",
)
_ACROSS = (
    "0xeff7337b37c8d217d01cb8223fe497abd75190d5",
    "0xcad97616f91872c02ba3553db315db4015cbe850",
    "0x394311a6aaa0d8e3411d8b62de4578d41322d1bd",
    "0x699ee12a1d97437a4a1e87c71e5d882b3881e2e3",
    "0xef1ec136931ab5728b0783fd87d109c9d15d31f1",
    "0x41ee28ee05341e7fdddc8d433ba66054cd302ca1",
    "0xeeaf25ad4f51fe2f57be2f206c9d8a568a618b99",
    "0x84a36d2c3d2078c560ff7b62815138a16671b549",
    "0x18105a39db36eb6f865704be858bcc7954c66467",
    "0x4d38a9e742450872ed777c4df3cef7d5cbe8e3a8",
    "0x15652636f3898f550b257b89926d5566821c32e1",
    "0xa36bc6867c9963de1a5daaf7882efb5b56899e8c",
)


def _specs(addresses: Sequence[str], top_share: float) -> tuple[SolverSpec, ...]:
    rest = (1 - top_share) / (len(addresses) - 1)
    shares = [top_share] + [rest] * (len(addresses) - 1)
    return tuple(SolverSpec(a, to_decimal(round(s, 6)), weight=s) for a, s in zip(addresses, shares))


PRESETS: dict[str, SyntheticProfile] = {
    "mayan": SyntheticProfile(
        bridge="mayan",
        median_intent_value=Decimal("74.395"),
        solver_profit_pct=Decimal("0.00381"),
        protocol_fee_pct=Decimal("0.00029"),
        total_liquidity=Decimal("600000"),
        intents_per_hour=150.0,
        refund_delay_s=1281,
        value_sigma=2.45,
        fill_latency_s=28,
        fill_gas_usd=Decimal("0.8"),
        rebalance_floor=0.8,
        solvers=_specs(_MAYAN, 0.24),
    ),
    "across": SyntheticProfile(
        bridge="across",
        median_intent_value=Decimal("73.06"),
        solver_profit_pct=Decimal("0.00018"),
        protocol_fee_pct=Decimal("0.00027"),
        total_liquidity=Decimal("8900000"),
        intents_per_hour=200.0,
        refund_delay_s=7200,
        value_sigma=2.9,
        src_chain="base",
        fill_latency_s=8,
        fill_gas_usd=Decimal("0.6"),
        rebalance_floor=0.7,
        solvers=_specs(_ACROSS, 0.19),
    ),
    "debridge": SyntheticProfile(
        bridge="debridge",
        median_intent_value=Decimal("260.411"),
        solver_profit_pct=Decimal("0.01129"),
        protocol_fee_pct=Decimal("0.013"),
        total_liquidity=Decimal("514000"),
        intents_per_hour=330.0,
        refund_delay_s=989,
        value_sigma=2.33,
        fill_latency_s=20,
        fill_gas_usd=Decimal("0.5"),
        solvers=_specs(_DEBRIDGE, 0.94),
    ),
}


def _participation(addresses, bands: dict[str, dict], excluded_share: float, weights: dict[str, float]):
    """Solvers where ``bands`` pins the out-of-class ones; the rest share the remainder."""
    inside = [a for a in addresses if a not in bands]
    out = []
    for a in addresses:
        if a in bands:
            out.append(SolverSpec(a, to_decimal(bands[a].pop("share")), weight=weights.get(a, 1.0), **bands[a]))
        else:
            out.append(SolverSpec(a, to_decimal(round((1 - excluded_share) / len(inside), 8)), weight=weights.get(a, 1.0)))
    return tuple(out)


_TWO_DAYS = 2 * 86_400

# Targeted-strategy fixtures. Mayan: the dominant solver skips intents under
# $100 and two solvers go quiet after the first two days. deBridge: two
# solvers serve only USDC below $500, everyone else serves all values.
PARTICIPATION_FIXTURES: dict[str, SyntheticProfile] = {
    "mayan": replace(
        PRESETS["mayan"],
        total_liquidity=Decimal("760000"),
        rebalance_floor=None,
        solvers=_participation(
            _MAYAN,
            {
                _MAYAN[0]: {"share": 0.835, "value_min": Decimal(100)},
                _MAYAN[6]: {"share": 0.04, "active_until": _TWO_DAYS},
                _MAYAN[7]: {"share": 0.035, "active_until": _TWO_DAYS},
            },
            0.91,
            {_MAYAN[0]: 20.0},
        ),
    ),
    "debridge": replace(
        PRESETS["debridge"],
        intents_per_hour=100.0,
        rebalance_floor=0.85,
        solvers=_participation(
            _DEBRIDGE,
            {
                _DEBRIDGE[2]: {"share": 0.44, "value_max": Decimal(500), "tokens": frozenset({"USDC"})},
                _DEBRIDGE[3]: {"share": 0.43, "value_max": Decimal(500), "tokens": frozenset({"USDC"})},
            },
            0.87,
            {_DEBRIDGE[0]: 4.0},
        ),
    ),
}


def preset(name: str, **changes) -> SyntheticProfile:
    try:
        base = PRESETS[name.lower()]
    except KeyError:
        raise InvalidProfile(f"unknown profile preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **changes) if changes else base


def profile_from_dict(data: dict) -> SyntheticProfile:
    """Build a profile from plain config values (JSON types)."""
    data = dict(data)
    base = data.pop("preset", None)
    if "solvers" in data and data["solvers"] is not None:
        data["solvers"] = tuple(
            SolverSpec(**{**s, "tokens": frozenset(s["tokens"]) if s.get("tokens") else None}) for s in data["solvers"]
        )
    if "tokens" in data:
        data["tokens"] = tuple((t, float(w)) for t, w in data["tokens"])
    if "diurnal_peak" in data and data["diurnal_peak"] is not None:
        data["diurnal_peak"] = (int(data["diurnal_peak"][0]), float(data["diurnal_peak"][1]))
    known = {f.name for f in fields(SyntheticProfile)}
    unknown = set(data) - known
    if unknown:
        raise InvalidProfile(f"unknown profile fields: {sorted(unknown)}")
    try:
        return preset(base, **data) if base else SyntheticProfile(**data)
    except TypeError as exc:
        raise InvalidProfile(str(exc)) from exc


def load_profile(path: str | Path) -> SyntheticProfile:
    return profile_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
