"""
scalar_kernels.py — entropy, rate functions, log-gamma and root finding
=======================================================================

All logarithms are natural. Every function here is pure; the array-aware
ones broadcast over numpy inputs and return a plain float for scalar input.

• shannon_entropy(p)          H(p) = p log(1/p) + (1-p) log(1/(1-p)), H(0)=H(1)=0
• psi_min / psi_max           exponents of the Wishart extreme-eigenvalue density bounds
• rate_min / rate_max         H(ρδ) + δ·ψ(λ,ρ), whose zeros define λ^min, λ^max
• rate_min_log                rate_min from log λ, for roots below the smallest double
• log_gamma / log_binomial    via scipy.special.gammaln
• find_root_bracketed         bisection (default) or Brent on a sign-change bracket
• bisect_array                element-wise bisection for vectorised functions
• minimize_bounded            scalar refinement after a grid scan
"""

from __future__ import annotations

# stdlib
import logging
from dataclasses import dataclass
from typing import Callable, Tuple

# third-party
import numpy as np
from scipy import optimize
from scipy.special import entr, gammaln, xlogy

from .errors import BracketError, DomainError, NonConvergenceError

log = logging.getLogger(__name__)

EPS = float(np.finfo(float).eps)
DEFAULT_TOL = 1e-10
MAX_ITER = 200


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _check(ok, msg: str) -> None:
    if not np.all(ok):
        raise DomainError(msg)


# ─────────────────────────── types ────────────────────────────
@dataclass(frozen=True)
class Probability:
    value: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.value <= 1.0):
            raise DomainError(f"probability must lie in [0, 1], got {self.value!r}")

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class RateEvaluation:
    kind: str            # "min" | "max"
    lam: float
    rho: float
    value: float


# ─────────────────────────── entropy / rates ────────────────────────────
def shannon_entropy(p):
    """Binary entropy in nats; endpoints return exactly 0."""
    arr = np.asarray(float(p) if isinstance(p, Probability) else p, dtype=float)
    _check((arr >= 0.0) & (arr <= 1.0), f"entropy argument outside [0, 1]: {p!r}")
    return _out(entr(arr) + entr(1.0 - arr))


def _psi_min(lam, rho):
    return (entr(rho) + entr(1.0 - rho)
            + 0.5 * ((1.0 - rho) * np.log(lam) + 1.0 - rho + xlogy(rho, rho) - lam))


def _psi_max(lam, rho):
    return 0.5 * ((1.0 + rho) * np.log(lam) + 1.0 + rho - xlogy(rho, rho) - lam)


def _rate_min(delta, rho, lam):
    x = rho * delta
    return entr(x) + entr(1.0 - x) + delta * _psi_min(lam, rho)


def _rate_min_log(delta, rho, t):
    # rate_min at λ = e^t; stays finite where λ itself underflows
    x = rho * delta
    psi = (entr(rho) + entr(1.0 - rho)
           + 0.5 * ((1.0 - rho) * t + 1.0 - rho + xlogy(rho, rho) - np.exp(t)))
    return entr(x) + entr(1.0 - x) + delta * psi


def _rate_max(delta, rho, lam):
    x = rho * delta
    return entr(x) + entr(1.0 - x) + delta * _psi_max(lam, rho)


def psi_min(lam, rho):
    """H(ρ) + ½[(1-ρ) log λ + 1 - ρ + ρ log ρ - λ]."""
    _check(np.asarray(lam) > 0, f"lambda must be positive, got {lam!r}")
    _check((np.asarray(rho) > 0) & (np.asarray(rho) < 1), f"rho must lie in (0, 1), got {rho!r}")
    return _out(_psi_min(np.asarray(lam, float), np.asarray(rho, float)))


def psi_max(lam, rho):
    """½[(1+ρ) log λ + 1 + ρ - ρ log ρ - λ]."""
    _check(np.asarray(lam) > 0, f"lambda must be positive, got {lam!r}")
    _check((np.asarray(rho) > 0) & (np.asarray(rho) <= 1), f"rho must lie in (0, 1], got {rho!r}")
    return _out(_psi_max(np.asarray(lam, float), np.asarray(rho, float)))


def _check_delta(delta) -> None:
    _check((np.asarray(delta) > 0) & (np.asarray(delta) <= 1), f"delta must lie in (0, 1], got {delta!r}")


def rate_max(delta, rho, lam):
    """H(ρδ) + δ·ψ_max(λ,ρ); its zero on [1+ρ, ∞) is λ^max(δ,ρ)."""
    _check_delta(delta)
    _check(np.asarray(lam) > 0, f"lambda must be positive, got {lam!r}")
    _check((np.asarray(rho) > 0) & (np.asarray(rho) <= 1), f"rho must lie in (0, 1], got {rho!r}")
    return _out(_rate_max(np.asarray(delta, float), np.asarray(rho, float), np.asarray(lam, float)))


def rate_min(delta, rho, lam):
    """H(ρδ) + δ·ψ_min(λ,ρ); its zero on (0, 1-ρ] is λ^min(δ,ρ)."""
    _check_delta(delta)
    _check(np.asarray(lam) > 0, f"lambda must be positive, got {lam!r}")
    _check((np.asarray(rho) > 0) & (np.asarray(rho) < 1), f"rho must lie in (0, 1), got {rho!r}")
    return _out(_rate_min(np.asarray(delta, float), np.asarray(rho, float), np.asarray(lam, float)))


def rate_min_log(delta, rho, log_lam):
    """rate_min(δ, ρ, e^t) evaluated from t = log λ."""
    _check_delta(delta)
    _check((np.asarray(rho) > 0) & (np.asarray(rho) < 1), f"rho must lie in (0, 1), got {rho!r}")
    return _out(_rate_min_log(np.asarray(delta, float), np.asarray(rho, float), np.asarray(log_lam, float)))


def rate_evaluation(kind: str, lam: float, rho: float) -> RateEvaluation:
    if kind == "min":
        return RateEvaluation(kind, float(lam), float(rho), psi_min(lam, rho))
    if kind == "max":
        return RateEvaluation(kind, float(lam), float(rho), psi_max(lam, rho))
    raise DomainError(f"unknown rate kind {kind!r} (expected 'min' or 'max')")


# ─────────────────────────── gamma ────────────────────────────
def log_gamma(x):
    _check(np.asarray(x) > 0, f"log_gamma needs a positive argument, got {x!r}")
    return _out(gammaln(np.asarray(x, float)))


def log_binomial(N, k):
    """log C(N, k) without forming factorials."""
    N_, k_ = np.asarray(N, float), np.asarray(k, float)
    _check((k_ >= 0) & (k_ <= N_), f"need 0 <= k <= N, got N={N!r}, k={k!r}")
    return _out(gammaln(N_ + 1.0) - gammaln(k_ + 1.0) - gammaln(N_ - k_ + 1.0))


# ─────────────────────────── root finding ────────────────────────────
def find_root_bracketed(f: Callable[[float], float], lo: float, hi: float,
                        tol: float = DEFAULT_TOL, maxiter: int = MAX_ITER,
                        method: str = "bisect") -> float:
    """
    Root of a continuous f with a sign change on [lo, hi].

    The returned x has f(x) == 0 or lies in a final bracket of width
    at most tol·max(1, |x|).
    """
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    lo, hi = float(min(lo, hi)), float(max(lo, hi))
    f_lo, f_hi = float(f(lo)), float(f(hi))
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if not (np.sign(f_lo) * np.sign(f_hi) < 0):
        raise BracketError(lo, hi, f_lo, f_hi)

    solver = {"bisect": optimize.bisect, "brent": optimize.brentq}.get(method)
    if solver is None:
        raise DomainError(f"unknown root method {method!r}")
    root, res = solver(f, lo, hi, xtol=tol / 2.0, rtol=max(tol / 2.0, 4.0 * EPS),
                       maxiter=maxiter, full_output=True, disp=False)
    if not res.converged:
        raise NonConvergenceError("root solve did not converge", best=float(root),
                                  iterations=res.iterations,
                                  diagnostics={"lo": lo, "hi": hi, "method": method})
    log.debug("root %.17g on [%g, %g] in %d %s steps", root, lo, hi, res.iterations, method)
    return float(root)


def bisect_array(f: Callable[[np.ndarray], np.ndarray], lo, hi,
                 tol: float = DEFAULT_TOL, maxiter: int = MAX_ITER) -> np.ndarray:
    """Element-wise bisection; f must map an array of abscissae to same-shape values."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    lo, hi = lo.copy(), hi.copy()
    lo0, hi0 = lo.copy(), hi.copy()
    f_lo, f_hi = np.asarray(f(lo), float), np.asarray(f(hi), float)
    bad = ~(np.sign(f_lo) * np.sign(f_hi) <= 0)
    if np.any(bad):
        i = np.flatnonzero(bad.ravel())[0]
        raise BracketError(float(lo.ravel()[i]), float(hi.ravel()[i]),
                           float(f_lo.ravel()[i]), float(f_hi.ravel()[i]))
    lo_negative = f_lo < 0
    for it in range(maxiter):
        mid = 0.5 * (lo + hi)
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(mid))):
            break
        fm = np.asarray(f(mid), float)
        right = (fm < 0) == lo_negative
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    else:
        raise NonConvergenceError("vectorised bisection did not converge",
                                  best=0.5 * (lo + hi), iterations=maxiter)
    root = 0.5 * (lo + hi)
    root = np.where(f_lo == 0.0, lo0, np.where(f_hi == 0.0, hi0, root))
    return root


def minimize_bounded(f: Callable[[float], float], lo: float, hi: float,
                     tol: float = 1e-8) -> Tuple[float, float]:
    """Local minimiser of f on [lo, hi] (golden-section with parabolic steps)."""
    if hi <= lo:
        return float(lo), float(f(lo))
    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                   options={"xatol": tol, "maxiter": 500})
    return float(res.x), float(res.fun)
