"""
rip_bounds.py — asymptotic RIP bounds for the Gaussian ensemble
===============================================================

For a phase point (δ, ρ) = (n/N, k/n):

    λ^max(δ,ρ) ≥ 1+ρ  solves  H(ρδ) + δ·ψ_max(λ,ρ) = 0
    λ^min(δ,ρ) ≤ 1-ρ  solves  H(ρδ) + δ·ψ_min(λ,ρ) = 0

    𝓛(δ,ρ) = 1 - λ^min(δ,ρ)
    𝓤(δ,ρ) = min_{ν∈[ρ,1]} λ^max(δ,ν) - 1

plus Edelman's finite-n density bounds g_max / g_min for the extreme
eigenvalues of a k×k Wishart matrix, and the union-bound exceedance
probabilities built from them. Density bounds are evaluated in log space.

Notes
-----
• λ^min is solved in log λ; near ρ → 1 the root sits many decades below 1
  and can underflow, so log_lambda_min reports the exponent itself.
• 𝓤 scans a 1024-point ν grid, then refines the best cell to 1e-8 in ν.
• Results for 𝓤 are memoised per (δ, ρ); they are pure and immutable.
"""

from __future__ import annotations

# stdlib
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

# third-party
import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import BracketError, DomainError
from .scalar_kernels import (EPS, _rate_max, _rate_min_log, bisect_array,
                             find_root_bracketed, log_binomial, minimize_bounded)

log = logging.getLogger(__name__)

ROOT_TOL = 1e-12
NU_GRID_POINTS = 1024
NU_REFINE_TOL = 1e-8
MAX_DOUBLINGS = 60


# ─────────────────────────── types ────────────────────────────
@dataclass(frozen=True)
class PhasePoint:
    delta: float   # n/N
    rho: float     # k/n

    def __post_init__(self) -> None:
        if not (0.0 < self.delta <= 1.0):
            raise DomainError(f"delta must lie in (0, 1], got {self.delta!r}")
        if not (0.0 < self.rho < 1.0):
            raise DomainError(f"rho must lie in (0, 1), got {self.rho!r}")


@dataclass(frozen=True)
class ProblemSize:
    k: int
    n: int
    N: int

    def __post_init__(self) -> None:
        if not (1 <= self.k <= self.n <= self.N):
            raise DomainError(f"need 1 <= k <= n <= N, got (k, n, N)=({self.k}, {self.n}, {self.N})")

    @property
    def delta(self) -> float:
        return self.n / self.N

    @property
    def rho(self) -> float:
        return self.k / self.n

    def point(self) -> PhasePoint:
        return PhasePoint(self.delta, self.rho)


@dataclass(frozen=True)
class RipBoundPair:
    point: PhasePoint
    lambda_min: float
    lambda_max: float
    L: float
    U: float
    nu_star: float       # minimiser of λ^max(δ,·) on [ρ, 1]


# ─────────────────────────── λ^max ────────────────────────────
def _lambda_max_raw(delta: float, rho: float, tol: float = ROOT_TOL,
                    method: str = "bisect") -> float:
    """Root of rate_max(δ,ρ,·) on [1+ρ, ∞); ρ may equal 1 here."""
    def f(lam: float) -> float:
        return float(_rate_max(delta, rho, lam))

    lo = 1.0 + rho
    width = 1.0
    hi = lo + width
    for _ in range(MAX_DOUBLINGS):
        if f(hi) < 0.0:
            break
        lo, width = hi, 2.0 * width
        hi = 1.0 + rho + width
    else:
        raise BracketError(1.0 + rho, hi, f(1.0 + rho), f(hi), what="lambda_max")
    return find_root_bracketed(f, lo, hi, tol=tol, method=method)


def lambda_max(point: PhasePoint, tol: float = ROOT_TOL) -> float:
    return _lambda_max_raw(point.delta, point.rho, tol)


def lambda_max_array(delta: float, rho, tol: float = ROOT_TOL) -> np.ndarray:
    """λ^max(δ, ρ_i) for an array of ρ_i in (0, 1]."""
    rho = np.asarray(rho, float)
    if np.any((rho <= 0) | (rho > 1)):
        raise DomainError("rho values must lie in (0, 1]")

    def f(lam):
        return _rate_max(delta, rho, lam)

    lo = 1.0 + rho
    width = np.ones_like(rho)
    hi = lo + width
    for _ in range(MAX_DOUBLINGS):
        pending = f(hi) >= 0.0
        if not pending.any():
            break
        lo = np.where(pending, hi, lo)
        width = np.where(pending, 2.0 * width, width)
        hi = 1.0 + rho + width
    else:
        raise BracketError(float(lo.min()), float(hi.max()), math.nan, math.nan, what="lambda_max")
    return bisect_array(f, lo, hi, tol=tol)


# ─────────────────────────── λ^min ────────────────────────────
def _log_lambda_min_raw(delta: float, rho: float, tol: float = ROOT_TOL) -> float:
    def g(t: float) -> float:
        return float(_rate_min_log(delta, rho, t))

    hi_t = math.log1p(-rho)
    lo_t = math.log(EPS * (1.0 - rho))
    for _ in range(MAX_DOUBLINGS):
        if g(lo_t) < 0.0:
            break
        lo_t *= 2.0
    else:
        raise BracketError(lo_t, hi_t, g(lo_t), g(hi_t), what="lambda_min")
    return find_root_bracketed(g, lo_t, hi_t, tol=tol)


def log_lambda_min(point: PhasePoint, tol: float = ROOT_TOL) -> float:
    """log λ^min; finite even where λ^min itself underflows to 0.0."""
    return _log_lambda_min_raw(point.delta, point.rho, tol)


def lambda_min(point: PhasePoint, tol: float = ROOT_TOL) -> float:
    return math.exp(log_lambda_min(point, tol))


def lambda_min_array(delta: float, rho, tol: float = ROOT_TOL) -> np.ndarray:
    """λ^min(δ, ρ_i) for an array of ρ_i in (0, 1)."""
    rho = np.asarray(rho, float)
    if np.any((rho <= 0) | (rho >= 1)):
        raise DomainError("rho values must lie in (0, 1)")

    def g(t):
        with np.errstate(under="ignore"):
            return _rate_min_log(delta, rho, t)

    hi_t = np.log1p(-rho)
    lo_t = np.log(EPS * (1.0 - rho))
    for _ in range(MAX_DOUBLINGS):
        pending = g(lo_t) >= 0.0
        if not pending.any():
            break
        lo_t = np.where(pending, 2.0 * lo_t, lo_t)
    else:
        raise BracketError(float(lo_t.min()), float(hi_t.max()), math.nan, math.nan, what="lambda_min")
    with np.errstate(under="ignore"):
        return np.exp(bisect_array(g, lo_t, hi_t, tol=tol))


# ─────────────────────────── 𝓛, 𝓤 ────────────────────────────
def bound_L(point: PhasePoint) -> float:
    return 1.0 - lambda_min(point)


@lru_cache(maxsize=1 << 16)
def _bound_u(delta: float, rho: float) -> Tuple[float, float]:
    grid = np.linspace(rho, 1.0, NU_GRID_POINTS)
    lam = lambda_max_array(delta, grid)
    # left endpoint via the scalar solver so that 𝓤 <= λ^max(δ,ρ) - 1 holds exactly
    lam[0] = _lambda_max_raw(delta, rho)
    i = int(np.argmin(lam))
    best_nu, best = float(grid[i]), float(lam[i])
    a, b = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, grid.size - 1)])
    nu, val = minimize_bounded(lambda v: _lambda_max_raw(delta, v, method="brent"),
                               a, b, tol=NU_REFINE_TOL)
    if val < best:
        best_nu, best = nu, val
    log.debug("U(%g, %g): nu*=%.10g grid cell %d", delta, rho, best_nu, i)
    return best - 1.0, best_nu


def bound_U(point: PhasePoint) -> float:
    return _bound_u(float(point.delta), float(point.rho))[0]


def bound_R(point: PhasePoint) -> float:
    """Bound on the symmetric constant R = max(L, U)."""
    return max(bound_L(point), bound_U(point))


def rip_bounds(point: PhasePoint) -> RipBoundPair:
    lmin = lambda_min(point)
    lmax = lambda_max(point)
    U, nu_star = _bound_u(float(point.delta), float(point.rho))
    return RipBoundPair(point=point, lambda_min=lmin, lambda_max=lmax,
                        L=1.0 - lmin, U=U, nu_star=nu_star)


def expected_extreme_eigenvalues(rho: float) -> Tuple[float, float]:
    """Large-n limits ((1-√ρ)², (1+√ρ)²) of E Λ^min and E Λ^max."""
    if not (0.0 <= rho <= 1.0):
        raise DomainError(f"rho must lie in [0, 1], got {rho!r}")
    r = math.sqrt(rho)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


# ─────────────────────────── Edelman bounds ────────────────────────────
def _check_kn(k: int, n: int) -> None:
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")


def log_edelman_density_bound_max(k: int, n: int, lam):
    """log g_max(k,n;λ)."""
    _check_kn(k, n)
    lam = np.asarray(lam, float)
    if np.any(lam <= 0):
        raise DomainError("lambda must be positive")
    x = n * lam
    out = (0.5 * math.log(2.0 * math.pi) - 1.5 * np.log(x) + 0.5 * (n + k) * np.log(x / 2.0)
           - x / 2.0 - gammaln(k / 2.0) - gammaln(n / 2.0))
    return float(out) if out.ndim == 0 else out


def edelman_density_bound_max(k: int, n: int, lam):
    return np.exp(log_edelman_density_bound_max(k, n, lam))


def log_edelman_density_bound_min(k: int, n: int, lam):
    """log g_min(k,n;λ)."""
    _check_kn(k, n)
    lam = np.asarray(lam, float)
    if np.any(lam <= 0):
        raise DomainError("lambda must be positive")
    x = n * lam
    out = (0.5 * np.log(math.pi / (2.0 * x)) - x / 2.0 + 0.5 * (n - k) * np.log(x / 2.0)
           + gammaln((n + 1) / 2.0) - gammaln(k / 2.0)
           - gammaln((n - k + 1) / 2.0) - gammaln((n - k + 2) / 2.0))
    return float(out) if out.ndim == 0 else out


def edelman_density_bound_min(k: int, n: int, lam):
    return np.exp(log_edelman_density_bound_min(k, n, lam))


def edelman_tail_integral_max(k: int, n: int, t: float) -> float:
    """∫_t^∞ g_max(k,n;λ) dλ by quadrature, scaled by the integrand's peak."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t!r}")
    mode = max(t, (n + k - 3) / n)
    scale = log_edelman_density_bound_max(k, n, mode)
    val, err = integrate.quad(
        lambda lam: math.exp(log_edelman_density_bound_max(k, n, lam) - scale),
        t, math.inf, limit=200)
    log.debug("tail integral k=%d n=%d t=%g: %g (±%g) x e^%g", k, n, t, val, err, scale)
    with np.errstate(over="ignore"):
        return float(val * np.exp(scale))


def finite_n_exceedance_bound_max(size: ProblemSize, t: float) -> float:
    """Union bound on Prob[1 + U(k,n,N) > t]: min(1, C(N,k)·2t·g_max(k,n;t))."""
    if t < 1.0 + size.k / size.n:
        raise DomainError(f"t must be >= 1 + k/n = {1.0 + size.k / size.n!r}, got {t!r}")
    log_bound = (log_binomial(size.N, size.k) + math.log(2.0 * t)
                 + log_edelman_density_bound_max(size.k, size.n, t))
    return 1.0 if log_bound >= 0.0 else math.exp(log_bound)


def finite_n_exceedance_bound_min(size: ProblemSize, t: float) -> float:
    """Union bound on Prob[1 - L(k,n,N) < t]: min(1, C(N,k)·t·g_min(k,n;t))."""
    t_max = (size.n - size.k - 1) / size.n
    if not (0.0 < t <= t_max):
        raise DomainError(f"t must lie in (0, (n-k-1)/n = {t_max!r}], got {t!r}")
    log_bound = (log_binomial(size.N, size.k) + math.log(t)
                 + log_edelman_density_bound_min(size.k, size.n, t))
    return 1.0 if log_bound >= 0.0 else math.exp(log_bound)
