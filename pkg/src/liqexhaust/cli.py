"""Command line entry point: ``liqexhaust {synth,triggers,simulate,sweep,byzantine}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import contextmanager
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .engine import AttackConfig, RouteIndex, simulate_schedule
from .errors import SimulationError
from .ingest import (
    load_liquidity_events,
    load_origin_balances,
    load_prices,
    load_traces,
    write_liquidity_events,
    write_traces,
)
from .liquidity import WindowMode, build_series
from .report import (
    FORMATS,
    Schedule,
    SweepGrid,
    aggregate,
    aggregate_byzantine,
    emit,
    emit_plot_series,
    run_sweep,
    write_byzantine_instances,
    write_instances,
)
from .strategies import SCOPE_PER_SOLVER, SCOPE_TOTAL, TriggerConfig, uniform_times, write_schedule
from .synthetic import PRESETS, generate_synthetic, load_profile, preset

log = logging.getLogger("liqexhaust")

ENV_DEFAULTS = {
    "attack_window": ("ATTACK_WINDOW", "1000"),
    "max_tx_value": ("MAX_TX_VALUE", "10000"),
    "volume_multiplier": ("VOLUME_MULTIPLIER", "1"),
}


def _env(name: str) -> str:
    var, fallback = ENV_DEFAULTS[name]
    return os.environ.get(var, fallback)


def _decimal(text: str) -> Decimal:
    try:
        return Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _override(text: str) -> Decimal | None:
    return None if text.strip().lower() in ("real", "none", "") else _decimal(text)


def _list(conv):
    def parse(text: str):
        return tuple(conv(part.strip()) for part in text.split(","))

    return parse


@contextmanager
def _output(path: str | None):
    if path in (None, "-"):
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        yield fh


def _profile(name: str):
    if name.lower() in PRESETS:
        return preset(name)
    return load_profile(name)


# --- shared input loading --------------------------------------------------------


def _load_inputs(args):
    if args.profile:
        prof = _profile(args.profile)
        records, events = generate_synthetic(prof, int(args.duration), args.seed)
        return records, build_series(events), prof
    if not args.traces or not args.liquidity_events:
        raise SystemExit("need --traces and --liquidity-events, or --profile")
    loaded = load_traces(args.traces)
    for rej in loaded.rejections:
        log.warning("line %s rejected (%s): %s", rej.line, rej.invariant, rej.message)
    prices = load_prices(args.prices) if args.prices else None
    events = load_liquidity_events(args.liquidity_events, prices=prices)
    origins = load_origin_balances(args.origin_balances) if args.origin_balances else None
    return loaded.records, build_series(events, origins), None


def _route_defaults(args, prof) -> None:
    if prof is not None:
        args.src_blockchain = args.src_blockchain or prof.src_chain
        args.dst_blockchain = args.dst_blockchain or prof.dst_chain
        args.bridge = args.bridge or prof.bridge
    missing = [f for f in ("src_blockchain", "dst_blockchain", "bridge") if not getattr(args, f)]
    if missing:
        raise SystemExit(f"missing route flags: {', '.join('--' + m.replace('_', '-') for m in missing)}")


def _interval(args, book):
    if args.warmup is None and args.start is None and args.end is None:
        return None
    first = min(s.start for s in book.values())
    t0 = args.start if args.start is not None else first + (args.warmup or 0)
    return (t0, args.end)


def _trigger_config(args, k: int) -> TriggerConfig:
    return TriggerConfig(
        k=k,
        window_mode=WindowMode(args.window_mode),
        cooldown_s=args.cooldown,
        scope=args.scope,
        sample_resolution=args.resolution,
    )


def _schedule(args, book, k: int) -> Schedule:
    interval = _interval(args, book)
    if getattr(args, "placement", "triggers") == "uniform":
        first = min(s.start for s in book.values())
        last = max(s.end for s in book.values())
        t0, t1 = interval if interval is not None else (first, last)
        times = uniform_times(t0, t1 if t1 is not None else last, args.count, spacing=args.cooldown, seed=args.seed)
        return Schedule(placed_at=tuple(times))
    return Schedule(_trigger_config(args, k), interval)


def _config(args, mode: str, **axis) -> AttackConfig:
    return AttackConfig(
        src_chain=args.src_blockchain,
        dst_chain=args.dst_blockchain,
        bridge=args.bridge,
        attack_window=axis.get("attack_window", int(args.attack_window)),
        max_tx_value=axis.get("max_tx_value", Decimal(args.max_tx_value)),
        volume_multiplier=axis.get("volume_multiplier", Decimal(args.volume_multiplier)),
        override_solver_profit_pct=args.solver_profit_pct,
        override_protocol_fee_pct=args.protocol_fee_pct,
        epsilon_model=args.epsilon_model,
        epsilon_value=args.epsilon_value,
        flood_gas_usd=args.flood_gas,
        mode=mode,
    )


def _meta(args, command: str, **extra) -> dict:
    meta = {
        "command": command,
        "seed": args.seed,
        "window_mode": args.window_mode,
        "trigger_scope": args.scope,
        "source": f"profile:{args.profile}" if args.profile else f"traces:{Path(args.traces).name}",
    }
    meta.update(extra)
    return meta


# --- subcommands -------------------------------------------------------------------


def cmd_synth(args) -> int:
    prof = _profile(args.profile)
    records, events = generate_synthetic(prof, int(args.duration), args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "traces.csv", "w", encoding="utf-8", newline="") as fh:
        write_traces(records, fh)
    with open(out / "liquidity_events.csv", "w", encoding="utf-8", newline="") as fh:
        write_liquidity_events(events, fh)
    print(f"wrote {len(records)} intents and {len(events)} liquidity events to {out}")
    return 0


def cmd_triggers(args) -> int:
    _, book, _ = _load_inputs(args)
    schedule = _schedule(args, book, args.k)
    triggers = schedule.triggers(book)
    with _output(args.out) as fh:
        if args.plot:
            emit_plot_series(book, triggers, fh, resolution=args.resolution, interval=_interval(args, book))
        else:
            write_schedule(triggers, fh)
    log.info("%d triggers", len(triggers))
    return 0


def _simulate(args, mode: str) -> int:
    records, book, prof = _load_inputs(args)
    _route_defaults(args, prof)
    config = _config(args, mode)
    schedule = _schedule(args, book, args.k)
    triggers = schedule.triggers(book)
    fp = config.fingerprint(seed=args.seed, **schedule.describe())
    results = simulate_schedule(triggers, RouteIndex(records, config.route), book, config, seed=args.seed, fingerprint=fp)
    params = {**{k: str(v) for k, v in config.to_dict().items()}, **schedule.describe(), "route": f"{config.src_chain}->{config.dst_chain}"}
    if mode == "byzantine":
        report = aggregate_byzantine(results, fp, window=config.attack_window, params=params)
    else:
        report = aggregate(results, fp, params=params)
    if args.instances:
        with _output(args.instances) as fh:
            if mode == "byzantine":
                write_byzantine_instances(results, fh)
            else:
                write_instances(results, fh)
    with _output(args.out) as fh:
        emit([report], args.format, fh, meta=_meta(args, mode, config_hash=fp, k=args.k))
    return 0


def cmd_simulate(args) -> int:
    return _simulate(args, args.mode)


def cmd_byzantine(args) -> int:
    return _simulate(args, "byzantine")


def cmd_sweep(args) -> int:
    records, book, prof = _load_inputs(args)
    _route_defaults(args, prof)
    base = _config(args, args.mode)
    grid = SweepGrid(
        k=args.k_values,
        attack_window=args.attack_window_values or (int(args.attack_window),),
        override_solver_profit_pct=args.solver_profit_values or (args.solver_profit_pct,),
        override_protocol_fee_pct=args.protocol_fee_values or (args.protocol_fee_pct,),
        max_tx_value=args.max_tx_values or (Decimal(args.max_tx_value),),
        volume_multiplier=args.volume_multiplier_values or (Decimal(args.volume_multiplier),),
        cap=args.grid_cap,
    )
    schedule = _schedule(args, book, grid.k[0])
    pairs = run_sweep(grid, RouteIndex(records, base.route), book, base, schedule, seed=args.seed, workers=args.workers)
    with _output(args.out) as fh:
        emit([r for _, r in pairs], args.format, fh, meta=_meta(args, "sweep", config_hash=base.fingerprint(seed=args.seed), cells=grid.size))
    return 0


# --- parser ----------------------------------------------------------------------------


def _add_inputs(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inputs")
    g.add_argument("--traces", help="intent trace file (csv or jsonl)")
    g.add_argument("--liquidity-events", help="solver liquidity event file (csv)")
    g.add_argument("--origin-balances", help="optional starting balances per solver (csv)")
    g.add_argument("--prices", help="daily price table for events recorded in token units")
    g.add_argument("--profile", help=f"generate synthetic inputs from a preset ({', '.join(sorted(PRESETS))}) or a JSON profile")
    g.add_argument("--duration", type=int, default=7 * 86_400, help="synthetic horizon in seconds")
    g.add_argument("--seed", type=int, default=0)


def _add_schedule(p: argparse.ArgumentParser, *, k_list: bool = False) -> None:
    g = p.add_argument_group("schedule")
    if k_list:
        g.add_argument("--k", dest="k_values", type=_list(int), default=(1,), help="comma-separated k values")
    else:
        g.add_argument("--k", type=int, default=1)
    g.add_argument("--window-mode", default=WindowMode.CAUSAL.value, choices=[m.value for m in WindowMode])
    g.add_argument("--scope", default=SCOPE_TOTAL, choices=[SCOPE_TOTAL, SCOPE_PER_SOLVER])
    g.add_argument("--cooldown", type=int, default=1000, help="minimum seconds between triggers")
    g.add_argument("--resolution", type=int, default=60, help="liquidity sampling step in seconds")
    g.add_argument("--warmup", type=int, help="skip this many seconds after the series start")
    g.add_argument("--start", type=int, help="first trigger time considered (epoch s)")
    g.add_argument("--end", type=int, help="last trigger time considered (epoch s)")


def _add_attack(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("attack")
    g.add_argument("--src-blockchain")
    g.add_argument("--dst-blockchain")
    g.add_argument("--bridge")
    g.add_argument("--attack-window", default=_env("attack_window"), help="seconds (env ATTACK_WINDOW)")
    g.add_argument("--max-tx-value", default=_env("max_tx_value"), help="USD cap per flooding intent (env MAX_TX_VALUE)")
    g.add_argument("--volume-multiplier", default=_env("volume_multiplier"), help="env VOLUME_MULTIPLIER")
    g.add_argument("--solver-profit-pct", type=_override, default=None, help="fraction, or 'Real' for historical")
    g.add_argument("--protocol-fee-pct", type=_override, default=None, help="fraction, or 'Real' for historical")
    g.add_argument("--epsilon-model", default="zero", choices=["zero", "fixed", "bps"])
    g.add_argument("--epsilon-value", type=_decimal, default=Decimal(0))
    g.add_argument("--flood-gas", type=_decimal, default=None, help="constant USD gas per flooding intent")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", default="table", choices=FORMATS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liqexhaust", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic traces and liquidity events")
    p.add_argument("--profile", required=True)
    p.add_argument("--duration", type=int, default=7 * 86_400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("triggers", help="detect attack triggers")
    _add_inputs(p)
    _add_schedule(p)
    p.add_argument("--plot", action="store_true", help="emit (t, L(t), trigger) series instead of the schedule")
    p.add_argument("--out")
    p.set_defaults(func=cmd_triggers)

    p = sub.add_parser("simulate", help="simulate attacks at every trigger and aggregate")
    _add_inputs(p)
    _add_schedule(p)
    _add_attack(p)
    _add_output(p)
    p.add_argument("--mode", default="rational", choices=["rational", "byzantine"])
    p.add_argument("--instances", help="also write per-instance results here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("byzantine", help="availability impact of draining all liquidity")
    _add_inputs(p)
    _add_schedule(p)
    _add_attack(p)
    _add_output(p)
    p.add_argument("--placement", default="triggers", choices=["triggers", "uniform"])
    p.add_argument("--count", type=int, default=200, help="instances for uniform placement")
    p.add_argument("--instances")
    p.set_defaults(func=cmd_byzantine)

    p = sub.add_parser("sweep", help="cross parameter axes and aggregate every cell")
    _add_inputs(p)
    _add_schedule(p, k_list=True)
    _add_attack(p)
    _add_output(p)
    p.add_argument("--mode", default="rational", choices=["rational", "byzantine"])
    p.add_argument("--attack-windows", dest="attack_window_values", type=_list(int))
    p.add_argument("--solver-profit-pcts", dest="solver_profit_values", type=_list(_override))
    p.add_argument("--protocol-fee-pcts", dest="protocol_fee_values", type=_list(_override))
    p.add_argument("--max-tx-values", dest="max_tx_values", type=_list(_decimal))
    p.add_argument("--volume-multipliers", dest="volume_multiplier_values", type=_list(_decimal))
    p.add_argument("--grid-cap", type=int, default=512)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "k_values", None) is not None:
        args.k = args.k_values[0]
    try:
        return args.func(args)
    except (SimulationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
