"""
Exception types raised by the HeomCast core.
"""

from typing import Optional


class HeomCastError(Exception):
    """Base class for every error the core raises on purpose."""


class InvalidSpecError(HeomCastError, ValueError):
    """A physical or dataset configuration violates its invariants."""


class LayoutMismatchError(InvalidSpecError):
    """A hierarchy state does not match the layout it is evaluated against."""


class CapacityError(HeomCastError):
    """The hierarchy would not fit in the configured memory budget."""

    def __init__(self, count: int, estimated_bytes: int, budget_bytes: int, hint: str = ""):
        self.count = count
        self.estimated_bytes = estimated_bytes
        self.budget_bytes = budget_bytes
        msg = (f"hierarchy of {count} auxiliary density operators needs ~"
               f"{estimated_bytes / 2**20:.1f} MiB, budget is {budget_bytes / 2**20:.1f} MiB")
        if hint:
            msg += f"; {hint}"
        super().__init__(msg)


class DivergenceError(HeomCastError, ArithmeticError):
    """Propagation produced non-finite or unphysical values."""

    def __init__(self, time: float, max_magnitude: float, detail: Optional[str] = None):
        self.time = time
        self.max_magnitude = max_magnitude
        msg = f"propagation diverged at t={time:.6g} ps (max |entry| = {max_magnitude:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class SeriesTooShortError(HeomCastError, ValueError):
    """A series is shorter than an operation requires."""

    def __init__(self, required: int, actual: int, what: str = "series"):
        self.required = required
        self.actual = actual
        super().__init__(f"{what} too short: need at least {required} points, got {actual}")


class BenchmarkError(HeomCastError):
    """A benchmark run could not produce a valid report."""


class AuditError(HeomCastError, ValueError):
    """Forecasts handed to the property audit are incomplete."""
