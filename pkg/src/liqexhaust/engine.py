"""Single attack instance simulation: rational economics and byzantine impact.

Net profit of a rational instance::

    net = revenue - induction_cost - fill_cost - epsilon

with ``induction_cost = alpha * L(t_s) * fee + n_flood * flood_gas``,
``fill_cost = sum(gas_i + auction_i)`` and ``revenue = sum(V_i * p_i)`` over
the intents captured in ``[t_s, t_s + W)``. All amounts are 6-place decimals
so the identity holds exactly.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import random
from dataclasses import asdict, dataclass, field, fields, replace
from decimal import ROUND_CEILING, Decimal, localcontext
from functools import lru_cache
from typing import NamedTuple, Sequence

from .errors import EmptyRoute
from .liquidity import LiquidityBook, total_liquidity
from .strategies import AttackTrigger
from .trace_model import ZERO, IntentRecord, MoneyUsd, money, to_decimal

EPSILON_MODELS = ("zero", "fixed", "bps")
MODES = ("rational", "byzantine")
DAY = 86_400


def _opt_decimal(v):
    return None if v is None else to_decimal(v)


@dataclass(frozen=True)
class AttackConfig:
    """Full parameterization of one simulated attack configuration.

    ``None`` overrides mean the historical ("Real") per-intent values are used.
    ``epsilon_value`` is USD for the ``fixed`` model and basis points of the
    drained capital for ``bps``. ``flood_gas_usd=None`` uses the trailing
    median fill gas on the route before the trigger.
    """

    src_chain: str
    dst_chain: str
    bridge: str
    attack_window: int = 1000
    max_tx_value: Decimal = Decimal(10000)
    volume_multiplier: Decimal = Decimal(1)
    override_solver_profit_pct: Decimal | None = None
    override_protocol_fee_pct: Decimal | None = None
    epsilon_model: str = "zero"
    epsilon_value: Decimal = ZERO
    flood_gas_usd: Decimal | None = None
    flood_gas_lookback_s: int = DAY
    mode: str = "rational"

    def __post_init__(self):
        for name in ("src_chain", "dst_chain", "bridge"):
            object.__setattr__(self, name, getattr(self, name).strip().lower())
        object.__setattr__(self, "max_tx_value", money(self.max_tx_value))
        object.__setattr__(self, "volume_multiplier", to_decimal(self.volume_multiplier))
        object.__setattr__(self, "epsilon_value", to_decimal(self.epsilon_value))
        for name in ("override_solver_profit_pct", "override_protocol_fee_pct", "flood_gas_usd"):
            object.__setattr__(self, name, _opt_decimal(getattr(self, name)))
        if self.attack_window <= 0:
            raise ValueError("attack window must be positive")
        if self.volume_multiplier <= 0:
            raise ValueError("volume multiplier must be positive")
        if self.max_tx_value <= 0:
            raise ValueError("max tx value must be positive")
        if self.epsilon_model not in EPSILON_MODELS:
            raise ValueError(f"unknown epsilon model {self.epsilon_model!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def route(self) -> tuple[str, str, str]:
        return (self.src_chain, self.dst_chain, self.bridge)

    def to_dict(self) -> dict[str, str | int | None]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = format(v, "f") if isinstance(v, Decimal) else v
        return out

    def fingerprint(self, **extra) -> str:
        payload = json.dumps({**self.to_dict(), **extra}, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def with_overrides(self, **changes) -> "AttackConfig":
        return replace(self, **changes)


def instance_seed(global_seed: int, t_s: int, fingerprint: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{t_s}:{fingerprint}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RouteIndex:
    """Route-filtered intents sorted by creation time, with windowed lookups."""

    def __init__(self, records: Sequence[IntentRecord], route: tuple[str, str, str]):
        self.route = route
        self.records = sorted((r for r in records if r.route == route), key=lambda r: (r.created_at, r.intent_id))
        self.created = [r.created_at for r in self.records]
        self._gas_micros = [int(r.fill_gas * 1_000_000) for r in self.records]
        self._fee_pct = [r.protocol_fee_pct for r in self.records]

    def __len__(self) -> int:
        return len(self.records)

    def _bounds(self, t0: int, t1: int) -> tuple[int, int]:
        return bisect.bisect_left(self.created, t0), bisect.bisect_left(self.created, t1)

    def window(self, t0: int, t1: int) -> list[IntentRecord]:
        """Intents created in ``[t0, t1)``."""
        i, j = self._bounds(t0, t1)
        return self.records[i:j]

    def _trailing(self, values: list, t_s: int, lookback: int) -> list:
        i, j = self._bounds(t_s - lookback, t_s)
        if j > i:
            return values[i:j]
        j = bisect.bisect_left(self.created, t_s)
        return values[:j] if j else values

    @lru_cache(maxsize=4096)
    def flood_gas_at(self, t_s: int, lookback: int = DAY) -> MoneyUsd:
        """Median fill gas over the ``lookback`` seconds before ``t_s``."""
        vals = sorted(self._trailing(self._gas_micros, t_s, lookback))
        if not vals:
            return ZERO
        return money(Decimal(vals[(len(vals) - 1) // 2]) / 1_000_000)

    @lru_cache(maxsize=4096)
    def protocol_fee_at(self, t_s: int, lookback: int = DAY) -> Decimal:
        """Median protocol fee rate over the ``lookback`` seconds before ``t_s``."""
        vals = sorted(self._trailing(self._fee_pct, t_s, lookback))
        if not vals:
            return ZERO
        return vals[(len(vals) - 1) // 2]


def as_route_index(records: Sequence[IntentRecord] | RouteIndex, config: AttackConfig) -> RouteIndex:
    if isinstance(records, RouteIndex):
        if records.route != config.route:
            raise ValueError(f"route index is for {records.route}, config wants {config.route}")
        return records
    return RouteIndex(records, config.route)


class InductionCost(NamedTuple):
    cost: MoneyUsd
    n_flood_intents: int
    fee_component: MoneyUsd
    gas_component: MoneyUsd
    drained: MoneyUsd


def induction_cost(
    alpha,
    liquidity,
    fee_pct,
    max_tx_value,
    flood_gas_per_intent,
) -> InductionCost:
    """Cost of flooding ``alpha * liquidity`` out of the solvers.

    The fee is charged on the drained capital; gas is paid once per flooding
    intent, of which ``ceil(drained / max_tx_value)`` are needed. The drained
    principal itself is returned at settlement and is not a cost.
    """
    alpha = to_decimal(alpha)
    if not (0 <= alpha <= 1):
        raise ValueError(f"alpha {alpha} outside [0, 1]")
    liquidity = money(liquidity)
    if liquidity < 0:
        raise ValueError("liquidity must be non-negative")
    drained = money(alpha * liquidity)
    n = int((drained / money(max_tx_value)).to_integral_value(rounding=ROUND_CEILING)) if drained > 0 else 0
    fee_part = money(drained * to_decimal(fee_pct))
    gas_part = money(n * money(flood_gas_per_intent))
    return InductionCost(money(fee_part + gas_part), n, fee_part, gas_part, drained)


def capture_intents(
    records: Sequence[IntentRecord] | RouteIndex,
    t_s: int,
    window: int,
    volume_multiplier=1,
    seed: int = 0,
) -> list[IntentRecord]:
    """Intents created in ``[t_s, t_s + window)``, rescaled by the volume multiplier.

    The integer part of the multiplier replicates every intent; the fractional
    part keeps one more copy of each intent with that probability, drawn in
    creation order from ``random.Random(seed)``.
    """
    if isinstance(records, RouteIndex):
        base = records.window(t_s, t_s + window)
    else:
        base = [r for r in records if t_s <= r.created_at < t_s + window]
    m = to_decimal(volume_multiplier)
    if m <= 0:
        raise ValueError("volume multiplier must be positive")
    whole = int(m)
    frac = float(m - whole)
    if frac == 0:
        return [r for r in base for _ in range(whole)] if whole != 1 else list(base)
    rng = random.Random(seed)
    out: list[IntentRecord] = []
    for r in base:
        copies = whole + (1 if rng.random() < frac else 0)
        out.extend([r] * copies)
    return out


@dataclass(frozen=True)
class AttackInstanceResult:
    t_s: int
    induction_cost: MoneyUsd
    n_flood_intents: int
    fill_cost: MoneyUsd
    revenue: MoneyUsd
    epsilon: MoneyUsd
    net_profit: MoneyUsd
    n_fulfillments: int
    volume_fulfilled: MoneyUsd
    captured_intent_ids: tuple[str, ...] = ()
    alpha: Decimal = Decimal(1)
    total_liquidity: MoneyUsd = ZERO
    working_capital: MoneyUsd = ZERO

    def identity_residual(self) -> Decimal:
        return self.net_profit + self.induction_cost + self.fill_cost + self.epsilon - self.revenue


def _epsilon(config: AttackConfig, drained: MoneyUsd) -> MoneyUsd:
    if config.epsilon_model == "fixed":
        return money(config.epsilon_value)
    if config.epsilon_model == "bps":
        return money(drained * config.epsilon_value / 10_000)
    return money(0)


def _flood_inputs(index: RouteIndex, t_s: int, config: AttackConfig) -> tuple[Decimal, MoneyUsd]:
    fee = config.override_protocol_fee_pct
    if fee is None:
        fee = index.protocol_fee_at(t_s, config.flood_gas_lookback_s)
    gas = config.flood_gas_usd
    if gas is None:
        gas = index.flood_gas_at(t_s, config.flood_gas_lookback_s)
    return fee, gas


def rational_attack(
    trigger: AttackTrigger,
    records: Sequence[IntentRecord] | RouteIndex,
    liquidity: LiquidityBook,
    config: AttackConfig,
    *,
    seed: int = 0,
) -> AttackInstanceResult:
    """Profit of a rational attacker who wins every intent in the window."""
    index = as_route_index(records, config)
    if not len(index):
        raise EmptyRoute(f"no intents on route {config.route}")
    t_s = trigger.at
    L = total_liquidity(liquidity, t_s)
    fee, gas = _flood_inputs(index, t_s, config)
    ind = induction_cost(trigger.alpha, L, fee, config.max_tx_value, gas)

    captured = capture_intents(index, t_s, config.attack_window, config.volume_multiplier, seed)
    override = config.override_solver_profit_pct
    revenue = ZERO
    fill = ZERO
    volume = ZERO
    for r in captured:
        p = r.solver_profit_pct if override is None else override
        revenue += money(r.intent_value * p)
        fill += r.fill_gas + r.auction_cost
        volume += r.intent_value
    eps = _epsilon(config, ind.drained)
    net = revenue - ind.cost - fill - eps
    return AttackInstanceResult(
        t_s=t_s,
        induction_cost=ind.cost,
        n_flood_intents=ind.n_flood_intents,
        fill_cost=money(fill),
        revenue=money(revenue),
        epsilon=eps,
        net_profit=money(net),
        n_fulfillments=len(captured),
        volume_fulfilled=money(volume),
        captured_intent_ids=tuple(r.intent_id for r in captured),
        alpha=trigger.alpha,
        total_liquidity=L,
        working_capital=ind.drained,
    )


@dataclass(frozen=True)
class ByzantineImpact:
    t_s: int
    window: int
    total_cost: MoneyUsd
    failed_intents: int
    failed_value_total: MoneyUsd
    failed_value_median: MoneyUsd
    failed_value_std: MoneyUsd
    missed_solver_profit: MoneyUsd
    missed_protocol_fees: MoneyUsd
    failed_intent_ids: tuple[str, ...] = field(default=(), repr=False)


def population_std(values: Sequence[Decimal]) -> MoneyUsd:
    if not values:
        return money(0)
    with localcontext() as ctx:
        ctx.prec = 50
        n = len(values)
        mean = sum(values, ZERO) / n
        var = sum(((v - mean) ** 2 for v in values), ZERO) / n
        return money(var.sqrt())


def byzantine_attack(
    trigger: AttackTrigger,
    records: Sequence[IntentRecord] | RouteIndex,
    liquidity: LiquidityBook,
    config: AttackConfig,
) -> ByzantineImpact:
    """Historical intents that fail while all solver liquidity is drained.

    The volume multiplier is ignored: the impact is measured on the real
    trace. The cost drains all liquidity (alpha = 1) and does not depend on
    the window length.
    """
    index = as_route_index(records, config)
    t_s = trigger.at
    L = total_liquidity(liquidity, t_s)
    fee, gas = _flood_inputs(index, t_s, config)
    cost = induction_cost(1, L, fee, config.max_tx_value, gas).cost

    failed = index.window(t_s, t_s + config.attack_window)
    values = sorted(r.intent_value for r in failed)
    return ByzantineImpact(
        t_s=t_s,
        window=config.attack_window,
        total_cost=cost,
        failed_intents=len(failed),
        failed_value_total=money(sum(values, ZERO)),
        failed_value_median=values[(len(values) - 1) // 2] if values else money(0),
        failed_value_std=population_std(values),
        missed_solver_profit=money(sum((r.solver_revenue for r in failed), ZERO)),
        missed_protocol_fees=money(sum((r.protocol_fee for r in failed), ZERO)),
        failed_intent_ids=tuple(r.intent_id for r in failed),
    )


def simulate_schedule(
    triggers: Sequence[AttackTrigger],
    records: Sequence[IntentRecord] | RouteIndex,
    liquidity: LiquidityBook,
    config: AttackConfig,
    *,
    seed: int = 0,
    fingerprint: str | None = None,
) -> list:
    """Run one instance per trigger, rational or byzantine per ``config.mode``."""
    index = as_route_index(records, config)
    fp = fingerprint or config.fingerprint()
    if config.mode == "byzantine":
        return [byzantine_attack(tr, index, liquidity, config) for tr in triggers]
    return [rational_attack(tr, index, liquidity, config, seed=instance_seed(seed, tr.at, fp)) for tr in triggers]


def result_to_dict(result) -> dict:
    out = {}
    for k, v in asdict(result).items():
        if isinstance(v, Decimal):
            out[k] = format(v, "f")
        elif isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out
