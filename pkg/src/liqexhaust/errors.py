"""Exception hierarchy shared across the simulator."""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for every error raised by this package."""


class RecordRejected(SimulationError, ValueError):
    """An intent record violates one of its invariants.

    ``invariant`` names the broken rule and ``field`` the offending column,
    so loaders can aggregate rejections into a report.
    """

    invariant = "record"

    def __init__(self, message: str, *, field: str | None = None, intent_id: str | None = None):
        super().__init__(message)
        self.field = field
        self.intent_id = intent_id


class NegativeValue(RecordRejected):
    invariant = "non_negative"


class TimestampOrder(RecordRejected):
    invariant = "timestamp_order"


class DuplicateId(RecordRejected):
    invariant = "unique_intent_id"


class UnknownChain(RecordRejected):
    invariant = "known_chain"


class EmptyAddress(SimulationError, ValueError):
    pass


# ingest
class FileMissing(SimulationError, FileNotFoundError):
    pass


class SchemaMismatch(SimulationError, ValueError):
    def __init__(self, missing: str):
        super().__init__(f"missing required column {missing!r}")
        self.missing = missing


class RowRejected(SimulationError, ValueError):
    """Too many rows failed validation while loading a trace file."""

    def __init__(self, message: str, rejections: list):
        super().__init__(message)
        self.rejections = rejections


class DuplicateKey(SimulationError, ValueError):
    pass


class NonPositivePrice(SimulationError, ValueError):
    pass


class MissingPrice(SimulationError, KeyError):
    pass


class InvalidProfile(SimulationError, ValueError):
    pass


# liquidity / strategies
class NegativeBalance(SimulationError, ValueError):
    def __init__(self, solver, at: int, balance):
        super().__init__(f"balance of {solver} fell to {balance} at t={at}")
        self.solver = solver
        self.at = at
        self.balance = balance


class OutOfRange(SimulationError, ValueError):
    pass


class InsufficientHistory(SimulationError, ValueError):
    pass


class EmptyCompetingSet(SimulationError, ValueError):
    pass


# engine / report
class EmptyRoute(SimulationError, ValueError):
    pass


class GridTooLarge(SimulationError, ValueError):
    pass
