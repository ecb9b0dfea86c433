"""File-based ingestion of intent traces, liquidity events and daily prices.

Trace files use the cross-chain transaction column names (``intent_id``,
``input_amount_usd``, ``dst_from_address`` ...). The mapping onto
:class:`IntentRecord` is fixed:

====================================  ===============================
column                                record field
====================================  ===============================
``input_amount_usd``                  ``intent_value``
``solver_profitability_pct``          ``solver_profit_pct`` (percent)
``percent_fee``                       ``protocol_fee_pct`` (percent)
``native_fix_fee_usd``                ``protocol_fixed_fee``
``adjusted_dst_fee_usd``/``dst_fee_usd``  ``fill_gas``
``auction_cost_usd``                  ``auction_cost`` (0 if absent)
``dst_from_address`` + dst chain      ``solver``
``src_timestamp``                     ``created_at``
``dst_timestamp``                     ``fulfilled_at``
``refund_timestamp``                  ``refunded_at``
``dst_symbol``                        ``dst_token``
====================================  ===============================

Every other column is carried through untouched in ``raw``.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
import os
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, NamedTuple

from .errors import (
    DuplicateKey,
    FileMissing,
    MissingPrice,
    NonPositivePrice,
    RecordRejected,
    RowRejected,
    SchemaMismatch,
)
from .trace_model import (
    ZERO,
    EventKind,
    IntentRecord,
    LiquidityEvent,
    MoneyUsd,
    SolverId,
    money,
    normalize_solver,
    to_decimal,
    validate_record,
)

logger = logging.getLogger(__name__)

REQUIRED_TRACE_COLUMNS = (
    "intent_id",
    "bridge",
    "src_blockchain",
    "dst_blockchain",
    "src_timestamp",
    "input_amount_usd",
)

MAPPED_COLUMNS = REQUIRED_TRACE_COLUMNS + (
    "dst_from_address",
    "dst_timestamp",
    "refund_timestamp",
    "solver_profitability_pct",
    "percent_fee",
    "percent_fee_usd",
    "native_fix_fee_usd",
    "adjusted_dst_fee_usd",
    "dst_fee_usd",
    "auction_cost_usd",
    "dst_symbol",
    "same_chain_swap",
)

# columns written by record_to_row, in order
TRACE_COLUMNS = (
    "intent_id",
    "bridge",
    "src_blockchain",
    "dst_blockchain",
    "dst_from_address",
    "src_timestamp",
    "dst_timestamp",
    "refund_timestamp",
    "input_amount_usd",
    "solver_profitability_pct",
    "percent_fee",
    "native_fix_fee_usd",
    "adjusted_dst_fee_usd",
    "auction_cost_usd",
    "dst_symbol",
    "same_chain_swap",
)

FEE_DISAGREEMENT_TOLERANCE = Decimal("0.01")
_PERCENT = Decimal(100)


class Rejection(NamedTuple):
    line: int
    intent_id: str | None
    invariant: str
    field: str | None
    message: str


class TraceLoad(NamedTuple):
    records: list[IntentRecord]
    rejections: list[Rejection]


def _blank(value) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


def _opt_int(value) -> int | None:
    if _blank(value):
        return None
    return int(to_decimal(value))


def _opt_dec(value, default: Decimal = ZERO) -> Decimal:
    if _blank(value):
        return default
    return to_decimal(value)


def _as_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Decimal):
        return format(value, "f")
    return str(value)


def row_to_record(row: Mapping[str, object], *, pct_unit: str = "percent") -> IntentRecord:
    """Map one trace row onto an unvalidated :class:`IntentRecord`.

    ``pct_unit`` says whether percentage columns hold percents (1.129) or
    fractions (0.01129).
    """
    scale = _PERCENT if pct_unit == "percent" else Decimal(1)
    dst_chain = str(row["dst_blockchain"]).strip().lower()
    value = money(row["input_amount_usd"])

    solver = None
    if not _blank(row.get("dst_from_address")):
        solver = normalize_solver(str(row["dst_from_address"]), dst_chain)

    fee_pct = _opt_dec(row.get("percent_fee")) / scale
    fixed_fee = money(_opt_dec(row.get("native_fix_fee_usd")))
    if not _blank(row.get("percent_fee_usd")):
        reported = to_decimal(row["percent_fee_usd"])
        recomputed = value * fee_pct
        base = max(abs(reported), abs(recomputed))
        if base > 0 and abs(reported - recomputed) / base > FEE_DISAGREEMENT_TOLERANCE:
            logger.warning(
                "intent %s: percent_fee_usd %s disagrees with percent_fee (recomputed %s); using percent_fee",
                row.get("intent_id"),
                reported,
                money(recomputed),
            )

    if not _blank(row.get("adjusted_dst_fee_usd")):
        gas = money(row["adjusted_dst_fee_usd"])
    else:
        gas = money(_opt_dec(row.get("dst_fee_usd")))

    raw = {k: _as_text(v) for k, v in row.items() if k not in MAPPED_COLUMNS and k is not None}
    same_chain = str(row.get("same_chain_swap") or "").strip().lower() in ("1", "true", "yes")

    return IntentRecord(
        intent_id=str(row["intent_id"]).strip(),
        bridge=str(row["bridge"]).strip().lower(),
        src_chain=str(row["src_blockchain"]).strip().lower(),
        dst_chain=dst_chain,
        solver=solver,
        created_at=int(to_decimal(row["src_timestamp"])),
        fulfilled_at=_opt_int(row.get("dst_timestamp")),
        refunded_at=_opt_int(row.get("refund_timestamp")),
        intent_value=value,
        solver_profit_pct=_opt_dec(row.get("solver_profitability_pct")) / scale,
        protocol_fee_pct=fee_pct,
        protocol_fixed_fee=fixed_fee,
        fill_gas=gas,
        auction_cost=money(_opt_dec(row.get("auction_cost_usd"))),
        dst_token=str(row.get("dst_symbol") or "").strip(),
        same_chain_swap=same_chain,
        raw=raw,
    )


def record_to_row(record: IntentRecord, *, pct_unit: str = "percent") -> dict[str, str]:
    """Inverse of :func:`row_to_record` (all values rendered as text)."""
    scale = _PERCENT if pct_unit == "percent" else Decimal(1)

    def opt(v):
        return "" if v is None else str(v)

    row = {
        "intent_id": record.intent_id,
        "bridge": record.bridge,
        "src_blockchain": record.src_chain,
        "dst_blockchain": record.dst_chain,
        "dst_from_address": record.solver.address if record.solver else "",
        "src_timestamp": str(record.created_at),
        "dst_timestamp": opt(record.fulfilled_at),
        "refund_timestamp": opt(record.refunded_at),
        "input_amount_usd": format(record.intent_value, "f"),
        "solver_profitability_pct": format((record.solver_profit_pct * scale).normalize(), "f"),
        "percent_fee": format((record.protocol_fee_pct * scale).normalize(), "f"),
        "native_fix_fee_usd": format(record.protocol_fixed_fee, "f"),
        "adjusted_dst_fee_usd": format(record.fill_gas, "f"),
        "auction_cost_usd": format(record.auction_cost, "f"),
        "dst_symbol": record.dst_token,
        "same_chain_swap": "true" if record.same_chain_swap else "",
    }
    row.update(record.raw)
    return row


def _require_file(path: str | os.PathLike) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileMissing(f"no such file: {p}")
    return p


def _detect_format(path: Path, fmt: str | None) -> str:
    if fmt:
        return fmt
    return "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"


def _iter_rows(path: Path, fmt: str, delimiter: str) -> Iterator[tuple[int, dict]]:
    if fmt == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh, delimiter=delimiter)
            header = reader.fieldnames or []
            for col in REQUIRED_TRACE_COLUMNS:
                if col not in header:
                    raise SchemaMismatch(col)
            for row in reader:
                yield reader.line_num, row
    elif fmt == "jsonl":
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                obj = json.loads(line, parse_float=Decimal)
                for col in REQUIRED_TRACE_COLUMNS:
                    if col not in obj:
                        raise SchemaMismatch(col)
                yield lineno, obj
    else:
        raise ValueError(f"unknown trace format {fmt!r}")


def load_traces(
    path: str | os.PathLike,
    fmt: str | None = None,
    *,
    delimiter: str = ",",
    pct_unit: str = "percent",
    max_reject_ratio: float = 0.05,
    min_rows_for_ratio: int = 20,
) -> TraceLoad:
    """Load and validate a trace file, sorted by ``(created_at, intent_id)``.

    Bad rows are skipped and listed in ``rejections``. Loading aborts with
    :class:`RowRejected` once at least ``min_rows_for_ratio`` rows were read
    and the rejected share exceeds ``max_reject_ratio``.
    """
    p = _require_file(path)
    records: list[IntentRecord] = []
    rejections: list[Rejection] = []
    seen: set[str] = set()
    total = 0
    for lineno, row in _iter_rows(p, _detect_format(p, fmt), delimiter):
        total += 1
        try:
            rec = validate_record(row_to_record(row, pct_unit=pct_unit))
        except RecordRejected as exc:
            rejections.append(Rejection(lineno, exc.intent_id or row.get("intent_id"), exc.invariant, exc.field, str(exc)))
            continue
        except (ValueError, ArithmeticError, TypeError) as exc:
            rejections.append(Rejection(lineno, row.get("intent_id"), "parse", None, str(exc)))
            continue
        if rec.intent_id in seen:
            rejections.append(Rejection(lineno, rec.intent_id, "unique_intent_id", "intent_id", "duplicate intent_id"))
            continue
        seen.add(rec.intent_id)
        records.append(rec)

    if rejections:
        logger.info("%s: rejected %d of %d rows", p, len(rejections), total)
    if total >= min_rows_for_ratio and len(rejections) / total > max_reject_ratio:
        raise RowRejected(f"{len(rejections)} of {total} rows rejected in {p}", rejections)
    records.sort(key=lambda r: (r.created_at, r.intent_id))
    return TraceLoad(records, rejections)


def write_traces(records: Iterable[IntentRecord], fh: IO[str], fmt: str = "csv", *, pct_unit: str = "percent") -> None:
    rows = [record_to_row(r, pct_unit=pct_unit) for r in records]
    if fmt == "jsonl":
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        return
    extra = sorted({k for row in rows for k in row} - set(TRACE_COLUMNS))
    writer = csv.DictWriter(fh, fieldnames=list(TRACE_COLUMNS) + extra, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


# --- liquidity event files ---------------------------------------------------

EVENT_COLUMNS = ("solver", "chain", "at_epoch_s", "delta_usd", "kind")
ORIGIN_COLUMNS = ("solver", "chain", "balance_usd")


def _read_csv(path: str | os.PathLike, required: Iterable[str], delimiter: str = ",") -> list[dict]:
    p = _require_file(path)
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaMismatch(col)
        return list(reader)


def load_liquidity_events(
    path: str | os.PathLike, *, delimiter: str = ",", prices: "PriceTable | None" = None
) -> list[LiquidityEvent]:
    """Read balance-changing events sorted by time.

    A row with a non-empty ``symbol`` column holds ``delta_usd`` in token units
    and is converted at that day's price; this needs ``prices``.
    """
    events = []
    for row in _read_csv(path, EVENT_COLUMNS, delimiter):
        at = int(to_decimal(row["at_epoch_s"]))
        symbol = (row.get("symbol") or "").strip()
        if symbol and symbol.upper() != "USD":
            if prices is None:
                raise MissingPrice(f"event in {symbol} units but no price table given")
            delta = usd_normalize(row["delta_usd"], symbol, utc_date(at), prices)
        else:
            delta = money(row["delta_usd"])
        events.append(
            LiquidityEvent(
                solver=normalize_solver(row["solver"], row["chain"]),
                at=at,
                delta=delta,
                kind=EventKind(row["kind"].strip()),
            )
        )
    events.sort(key=lambda e: e.at)
    return events


def load_origin_balances(path: str | os.PathLike, *, delimiter: str = ",") -> dict[SolverId, MoneyUsd]:
    out: dict[SolverId, MoneyUsd] = {}
    for row in _read_csv(path, ORIGIN_COLUMNS, delimiter):
        sid = normalize_solver(row["solver"], row["chain"])
        if sid in out:
            raise DuplicateKey(f"duplicate origin balance for {sid}")
        out[sid] = money(row["balance_usd"])
    return out


def write_liquidity_events(events: Iterable[LiquidityEvent], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(EVENT_COLUMNS)
    for e in events:
        writer.writerow([e.solver.address, e.solver.chain, e.at, format(e.delta, "f"), e.kind.value])


def write_origin_balances(origins: Mapping[SolverId, MoneyUsd], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(ORIGIN_COLUMNS)
    for sid in sorted(origins):
        writer.writerow([sid.address, sid.chain, format(origins[sid], "f")])


# --- prices ------------------------------------------------------------------


@dataclass(frozen=True)
class PriceTable:
    """Daily USD prices keyed by (upper-case symbol, UTC date)."""

    entries: Mapping[tuple[str, dt.date], Decimal]

    def price(self, symbol: str, date: dt.date | str) -> Decimal:
        if isinstance(date, str):
            date = dt.date.fromisoformat(date)
        try:
            return self.entries[(symbol.strip().upper(), date)]
        except KeyError:
            raise MissingPrice(f"no price for {symbol} on {date}") from None


def utc_date(epoch_s: int) -> dt.date:
    return dt.datetime.fromtimestamp(epoch_s, tz=dt.timezone.utc).date()


def build_price_table(rows: Iterable[tuple[str, dt.date | str, object]]) -> PriceTable:
    entries: dict[tuple[str, dt.date], Decimal] = {}
    for symbol, date, price in rows:
        if isinstance(date, str):
            date = dt.date.fromisoformat(date.strip())
        key = (symbol.strip().upper(), date)
        value = to_decimal(price)
        if not value.is_finite() or value <= 0:
            raise NonPositivePrice(f"price for {key[0]} on {date} is {price}")
        if key in entries:
            raise DuplicateKey(f"duplicate price for {key[0]} on {date}")
        entries[key] = value
    return PriceTable(entries)


def load_prices(path: str | os.PathLike, *, delimiter: str = ",") -> PriceTable:
    rows = _read_csv(path, ("symbol", "date", "price_usd"), delimiter)
    return build_price_table((r["symbol"], r["date"], r["price_usd"]) for r in rows)


def usd_normalize(amount, symbol: str, date: dt.date | str, prices: PriceTable) -> MoneyUsd:
    """Convert token units to USD at the day's price, rounded half-even to 6 places."""
    amount = to_decimal(amount)
    if amount == 0:
        return money(0)
    return (amount * prices.price(symbol, date)).quantize(Decimal("0.000001"), rounding=ROUND_HALF_EVEN)


def dumps_traces(records: Iterable[IntentRecord], fmt: str = "csv") -> str:
    buf = io.StringIO()
    write_traces(records, buf, fmt)
    return buf.getvalue()
