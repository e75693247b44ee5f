"""Exception types and small input-checking helpers shared across the package."""
from __future__ import annotations

import numpy as np


class ContractViolation(ValueError):
    """Raised when a caller breaks an operation's precondition (shapes, ranges)."""


class ParseError(ValueError):
    """Malformed ARAS input. ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int | None = None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"line {lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ShortageError(ValueError):
    """A partition plan asks for more rows of some class than are available.

    ``deficits`` maps class index to the number of missing rows.
    """

    def __init__(self, deficits: dict[int, int], participant: int | None = None):
        self.deficits = dict(sorted(deficits.items()))
        self.participant = participant
        parts = ", ".join(f"class {c}: short by {d}" for c, d in self.deficits.items())
        who = f"participant {participant}: " if participant is not None else ""
        super().__init__(f"{who}insufficient rows ({parts})")


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


def as_vector(values, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def check_same_length(a: np.ndarray, b: np.ndarray, what: str = "vectors") -> None:
    if a.shape != b.shape:
        raise ContractViolation(f"{what} length mismatch: {a.shape[0]} != {b.shape[0]}")


def check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains NaN or Inf")


def check_positive(value, name: str, allow_zero: bool = False) -> None:
    ok = value >= 0 if allow_zero else value > 0
    if not ok:
        bound = ">= 0" if allow_zero else "> 0"
        raise ContractViolation(f"{name} must be {bound}, got {value!r}")
