"""Exception hierarchy shared by every riplab module."""

from __future__ import annotations

from typing import Any, Dict, Optional


class RipLabError(Exception):
    """Base class; the CLI maps it to exit code 1."""


class DomainError(RipLabError, ValueError):
    """Argument outside the admissible range (exit code 2)."""


class BracketError(RipLabError):
    """A root bracket without a sign change."""

    def __init__(self, lo: float, hi: float, f_lo: float, f_hi: float, what: str = "root"):
        self.lo, self.hi, self.f_lo, self.f_hi = lo, hi, f_lo, f_hi
        super().__init__(
            f"{what} not bracketed on [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}")


class NonConvergenceError(RipLabError, RuntimeError):
    """Iteration cap reached; `best` is the last iterate."""

    def __init__(self, message: str, best: Any = None, iterations: int = 0,
                 diagnostics: Optional[Dict[str, Any]] = None):
        self.best = best
        self.iterations = iterations
        self.diagnostics = dict(diagnostics or {})
        super().__init__(f"{message} (after {iterations} iterations)")


class InfeasibleError(RipLabError):
    """No admissible value exists (unbounded stability factor, unattainable cap)."""
