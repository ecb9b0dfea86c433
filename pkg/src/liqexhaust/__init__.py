"""Liquidity exhaustion attack simulation for intent-based bridges."""

from .engine import (
    AttackConfig,
    AttackInstanceResult,
    ByzantineImpact,
    RouteIndex,
    byzantine_attack,
    capture_intents,
    induction_cost,
    rational_attack,
    simulate_schedule,
)
from .ingest import load_liquidity_events, load_origin_balances, load_prices, load_traces, write_traces
from .liquidity import (
    IntentClass,
    IntentCriteria,
    LiquiditySeries,
    WindowMode,
    build_series,
    effective_liquidity,
    infer_competing_set,
    stats_at,
    total_liquidity,
)
from .report import AggregateReport, SweepGrid, aggregate, emit, run_sweep
from .strategies import AttackTrigger, TriggerConfig, detect_triggers, placed_triggers, targeted_triggers
from .synthetic import PRESETS, SyntheticProfile, generate_synthetic, preset
from .trace_model import EventKind, IntentRecord, LiquidityEvent, SolverId

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "AttackConfig",
    "AttackInstanceResult",
    "AttackTrigger",
    "ByzantineImpact",
    "EventKind",
    "IntentClass",
    "IntentCriteria",
    "IntentRecord",
    "LiquidityEvent",
    "LiquiditySeries",
    "PRESETS",
    "RouteIndex",
    "SolverId",
    "SweepGrid",
    "SyntheticProfile",
    "TriggerConfig",
    "WindowMode",
    "aggregate",
    "build_series",
    "byzantine_attack",
    "capture_intents",
    "detect_triggers",
    "effective_liquidity",
    "emit",
    "generate_synthetic",
    "induction_cost",
    "infer_competing_set",
    "load_liquidity_events",
    "load_origin_balances",
    "load_prices",
    "load_traces",
    "placed_triggers",
    "preset",
    "rational_attack",
    "run_sweep",
    "simulate_schedule",
    "stats_at",
    "targeted_triggers",
    "total_liquidity",
    "write_traces",
]
