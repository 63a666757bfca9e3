"""
phase_transitions.py — strong-equivalence lower-bound curves
============================================================

    μ^FL(δ,ρ) = ((1+√2)/4)·((1+𝓤(δ,2ρ))/(1-𝓛(δ,2ρ)) - 1)
    μ^RV(δ,ρ) = ρ·(12 + 8·log(1/ρδ)·γ(ρδ)²)
    ρ_S^C(δ)  : max(𝓛(δ,2ρ), 𝓤(δ,2ρ)) = √2 - 1

ρ_S(δ) is the ρ-root of μ(δ,·) = 1 (resp. the Candès condition), solved
in log ρ so the tolerance is relative to ρ itself.

ℓ^q family
----------
μ_α(δ,2αρ) = α^{1/2-1/q}·μ^FL(δ,αρ). Writing r = αρ, the condition
μ_α = 1 becomes μ^FL(δ,r) = α^{1/q-1/2}, so every α gives ρ = r/α with the
coupling α ≤ 1/(2ρ) equivalent to 2r < 1. Any α beating α = 1 satisfies
α ≤ 1/(2ρ(1)), which bounds the α scan.

Stability factors (C1, D1, C2, D2) depend on α, q and m = μ^FL(δ,αρ)
only, since β(δ,2αρ) = 4m + 1 + √2; all four grow with m. A cap Υ on one
of them is therefore a cap on m per α, and the capped curve reuses the
same machinery with a lower target level.
"""

from __future__ import annotations

# stdlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

# third-party
import numpy as np

from .errors import DomainError, InfeasibleError, NonConvergenceError, RipLabError
from .rip_bounds import (PhasePoint, bound_L, bound_R, bound_U,
                         lambda_max_array, lambda_min_array)
from .scalar_kernels import find_root_bracketed, minimize_bounded

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
CANDES_LEVEL = SQRT2 - 1.0
CURVE_TOL = 1e-10
RHO_FLOOR = 1e-9
RHO_CEIL = 0.49
ALPHA_POINTS = 256
ALPHA_REFINE_TOL = 1e-3
TABLE_POINTS = 2048
FACTORS = ("C1", "D1", "C2", "D2")


class CurveMethod(str, Enum):
    FL = "FL"
    RV = "RV"
    CANDES = "CANDES"
    FL_Q = "FL_Q"
    FL_Q_BOUNDED = "FL_Q_BOUNDED"

    @classmethod
    def parse(cls, name: str) -> "CurveMethod":
        try:
            return cls(str(name).strip().upper().replace("-", "_"))
        except ValueError:
            raise DomainError(
                f"unknown curve method {name!r} (expected one of {', '.join(m.value for m in cls)})"
            ) from None


# ─────────────────────────── types ────────────────────────────
@dataclass(frozen=True)
class CurveSample:
    delta: float
    rho: float                       # nan when the sample failed
    residual: float
    alpha: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class TransitionCurve:
    method: CurveMethod
    q: float
    constraint: Optional[Tuple[str, float]]
    samples: Tuple[CurveSample, ...]
    solver_tol: float

    @property
    def deltas(self) -> np.ndarray:
        return np.array([s.delta for s in self.samples])

    @property
    def rhos(self) -> np.ndarray:
        return np.array([s.rho for s in self.samples])

    @property
    def failures(self) -> List[CurveSample]:
        return [s for s in self.samples if not s.ok]

    def min_inverse(self) -> float:
        """min over successful samples of 1/ρ_S (the proportionality constant)."""
        r = self.rhos
        r = r[np.isfinite(r)]
        return float(np.min(1.0 / r)) if r.size else math.nan


@dataclass(frozen=True)
class StabilityFactors:
    C1: float
    D1: float
    C2: float
    D2: float
    beta: float
    q: float
    alpha: float
    mu_alpha: float


@dataclass(frozen=True)
class LqSolution:
    rho: float
    alpha: float
    q: float
    level: float                     # μ^FL target at the maximiser
    missing_cells: int = 0
    factor: Optional[str] = None
    cap: Optional[float] = None


# ─────────────────────────── helpers ────────────────────────────
def _check_delta(delta: float) -> float:
    if not (0.0 < delta <= 1.0):
        raise DomainError(f"delta must lie in (0, 1], got {delta!r}")
    return float(delta)


def _check_q(q: float) -> float:
    if not (0.0 < q <= 1.0):
        raise DomainError(f"q must lie in (0, 1], got {q!r}")
    return float(q)


def _solve_log_rho(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    t = find_root_bracketed(lambda s: f(math.exp(s)), math.log(lo), math.log(hi),
                            tol=tol, method="brent")
    return math.exp(t)


# ─────────────────────────── Foucart–Lai ────────────────────────────
def mu_fl_from_constants(L, U):
    """((1+√2)/4)·((1+U)/(1-L) - 1) for RIP constants of order 2k."""
    L_, U_ = np.asarray(L, float), np.asarray(U, float)
    if np.any(L_ < 0) or np.any(U_ < 0):
        raise DomainError("RIP constants must be nonnegative")
    with np.errstate(divide="ignore"):
        out = (1.0 + SQRT2) / 4.0 * ((1.0 + U_) / (1.0 - L_) - 1.0)
    out = np.where(L_ >= 1.0, np.inf, out)
    return float(out) if out.ndim == 0 else out


def mu_fl(point: PhasePoint) -> float:
    if not 2.0 * point.rho < 1.0:
        raise DomainError(f"mu_fl needs 2*rho < 1, got rho={point.rho!r}")
    p2 = PhasePoint(point.delta, 2.0 * point.rho)
    return mu_fl_from_constants(bound_L(p2), bound_U(p2))


def rho_s_fl(delta: float, tol: float = CURVE_TOL) -> float:
    """Root in (0, 1/2) of μ^FL(δ,·) = 1."""
    delta = _check_delta(delta)
    return _solve_log_rho(lambda r: mu_fl(PhasePoint(delta, r)) - 1.0, RHO_FLOOR, RHO_CEIL, tol)


# ─────────────────────────── Rudelson–Vershynin ────────────────────────────
def gamma_rv(x: float) -> float:
    """exp(log(1 + 2ℓ)/(4ℓ)) with ℓ = log(e/x)."""
    if not (0.0 < x < math.e):
        raise DomainError(f"gamma_rv needs 0 < x < e, got {x!r}")
    ell = 1.0 - math.log(x)
    return math.exp(math.log1p(2.0 * ell) / (4.0 * ell))


def mu_rv(point: PhasePoint) -> float:
    x = point.rho * point.delta
    return point.rho * (12.0 + 8.0 * math.log(1.0 / x) * gamma_rv(x) ** 2)


def rho_s_rv(delta: float, tol: float = CURVE_TOL) -> float:
    delta = _check_delta(delta)
    grid = np.geomspace(RHO_FLOOR, RHO_CEIL, 64)
    vals = np.array([mu_rv(PhasePoint(delta, r)) for r in grid])
    above = np.flatnonzero(vals >= 1.0)
    if above.size == 0 or above[0] == 0:
        raise DomainError(f"mu_rv - 1 has no sign change on [{RHO_FLOOR}, {RHO_CEIL}] at delta={delta}")
    i = int(above[0])
    if not np.all(np.diff(vals[: i + 1]) > 0):
        log.warning("mu_rv is not increasing below its crossing at delta=%g", delta)
    return _solve_log_rho(lambda r: mu_rv(PhasePoint(delta, r)) - 1.0, grid[i - 1], grid[i], tol)


# ─────────────────────────── Candès ────────────────────────────
def candes_condition(point: PhasePoint) -> float:
    """max(𝓛, 𝓤) at (δ, 2ρ) minus √2 - 1."""
    if not 2.0 * point.rho < 1.0:
        raise DomainError(f"candes_condition needs 2*rho < 1, got rho={point.rho!r}")
    return bound_R(PhasePoint(point.delta, 2.0 * point.rho)) - CANDES_LEVEL


def rho_s_candes(delta: float, tol: float = CURVE_TOL) -> float:
    delta = _check_delta(delta)
    return _solve_log_rho(lambda r: candes_condition(PhasePoint(delta, r)), RHO_FLOOR, RHO_CEIL, tol)


# ─────────────────────────── ℓ^q ────────────────────────────
def mu_alpha(point: PhasePoint, q: float, alpha: float) -> float:
    """α^{1/2-1/q}·μ(δ,2αρ)."""
    q = _check_q(q)
    if not (1.0 <= alpha and 2.0 * alpha * point.rho < 1.0):
        raise DomainError(f"alpha must satisfy 1 <= alpha < 1/(2 rho), got alpha={alpha!r}, rho={point.rho!r}")
    return alpha ** (0.5 - 1.0 / q) * mu_fl(PhasePoint(point.delta, alpha * point.rho))


def beta_factor(point: PhasePoint) -> float:
    """(1+√2)(1+𝓤(δ,ρ))/(1-𝓛(δ,ρ))."""
    return (1.0 + SQRT2) * (1.0 + bound_U(point)) / (1.0 - bound_L(point))


def _factor_table(mu_a: float, beta: float, q: float) -> dict:
    if mu_a >= 1.0:
        return {name: math.inf for name in FACTORS}
    denom = (1.0 - mu_a ** q) ** (1.0 / q)
    return {
        "C1": 2.0 ** (2.0 / q - 1.0) * (1.0 + mu_a ** q) ** (1.0 / q) / denom,
        "D1": 2.0 ** (2.0 / q - 1.0) * beta / denom,
        "C2": 2.0 ** (2.0 / q - 2.0) * (beta + 1.0 - SQRT2) / denom,
        "D2": 2.0 ** (1.0 / q - 2.0) * beta * (beta + 1.0 - SQRT2) / denom + 2.0 * beta,
    }


def factor_value(name: str, m: float, alpha: float, q: float) -> float:
    """One stability factor as a function of m = μ^FL(δ,αρ)."""
    if name not in FACTORS:
        raise DomainError(f"unknown stability factor {name!r} (expected one of {', '.join(FACTORS)})")
    mu_a = alpha ** (0.5 - 1.0 / q) * m
    return _factor_table(mu_a, 4.0 * m + 1.0 + SQRT2, q)[name]


def factor_floor(name: str, q: float) -> float:
    """Value of a factor in the μ → 0 limit; caps at or below it are infeasible."""
    return factor_value(name, 0.0, 1.0, _check_q(q))


def stability_factors(point: PhasePoint, q: float, alpha: float) -> StabilityFactors:
    mu_a = mu_alpha(point, q, alpha)
    if mu_a >= 1.0:
        raise InfeasibleError(
            f"stability factors unbounded: mu_alpha={mu_a:.6g} >= 1 at "
            f"(delta, rho, q, alpha)=({point.delta}, {point.rho}, {q}, {alpha})")
    beta = beta_factor(PhasePoint(point.delta, 2.0 * alpha * point.rho))
    f = _factor_table(mu_a, beta, q)
    return StabilityFactors(C1=f["C1"], D1=f["D1"], C2=f["C2"], D2=f["D2"],
                            beta=beta, q=q, alpha=float(alpha), mu_alpha=mu_a)


class _MuTable:
    """μ^FL(δ, r) tabulated on a log r grid for the α scan."""

    def __init__(self, delta: float, points: int = TABLE_POINTS) -> None:
        s = np.geomspace(2.0 * RHO_FLOOR * 100, 0.99, points)     # s = 2r
        L = 1.0 - lambda_min_array(delta, s)
        lam = lambda_max_array(delta, np.append(s, 1.0))
        U = np.minimum.accumulate(lam[::-1])[::-1][:-1] - 1.0
        mu = np.maximum.accumulate(mu_fl_from_constants(L, U))
        keep = np.isfinite(mu) & (mu > 0)
        self.log_r = np.log(s[keep] / 2.0)
        self.log_mu = np.log(mu[keep])

    def r_at(self, levels: np.ndarray) -> np.ndarray:
        return np.exp(np.interp(np.log(levels), self.log_mu, self.log_r,
                                left=np.nan, right=np.nan))

    def bracket(self, level: float) -> Tuple[float, float]:
        j = int(np.searchsorted(self.log_mu, math.log(level)))
        lo = self.log_r[max(j - 3, 0)]
        hi = self.log_r[min(j + 2, self.log_r.size - 1)]
        return math.exp(lo), math.exp(hi)


def _solve_level(delta: float, level: float, table: _MuTable, tol: float) -> float:
    """r with μ^FL(δ, r) = level, bracketed from the table."""
    def f(r: float) -> float:
        return mu_fl(PhasePoint(delta, r)) - level

    lo, hi = table.bracket(level)
    try:
        return _solve_log_rho(f, lo, hi, tol)
    except RipLabError:
        log.debug("table bracket [%g, %g] missed level %g at delta=%g; widening", lo, hi, level, delta)
        return _solve_log_rho(f, RHO_FLOOR, math.exp(table.log_r[-1]), tol)


def _cap_level(factor: str, cap: float, alpha: float, q: float) -> float:
    """Largest m with factor(m, α) ≤ cap, below the μ_α = 1 level."""
    m_star = alpha ** (1.0 / q - 0.5)
    hi = m_star * (1.0 - 1e-12)
    if factor_value(factor, hi, alpha, q) <= cap:
        return hi
    return find_root_bracketed(lambda m: factor_value(factor, m, alpha, q) - cap,
                               0.0, hi, tol=1e-13, method="brent")


def solve_fl_q(delta: float, q: float, factor: Optional[str] = None,
               cap: Optional[float] = None, alpha_points: int = ALPHA_POINTS,
               tol: float = CURVE_TOL) -> LqSolution:
    """
    Maximise over α the ρ-roots of μ_α(δ,2αρ) = 1, optionally subject to
    a cap on one stability factor. A 256-point log α grid on the
    tabulated μ^FL picks the cell; bounded Brent with exact root solves
    refines it.
    """
    delta, q = _check_delta(delta), _check_q(q)
    if (factor is None) != (cap is None):
        raise DomainError("factor and cap must be given together")
    if factor is not None:
        floor = factor_floor(factor, q)
        if not cap > floor:
            raise InfeasibleError(f"cap {cap!r} on {factor} is not above its floor {floor:.6g} at q={q}")

    def level(a: float) -> float:
        if factor is None:
            return a ** (1.0 / q - 0.5)
        return _cap_level(factor, cap, a, q)

    table = _MuTable(delta)
    if factor is None:
        rho_1 = rho_s_fl(delta, tol)
    else:
        rho_1 = _solve_level(delta, level(1.0), table, tol)
    candidates = [(rho_1, 1.0, level(1.0))]

    alphas = np.geomspace(1.0, max(1.0, 0.5 / rho_1), alpha_points)
    levels = np.array([level(a) for a in alphas])
    rho = table.r_at(levels) / alphas
    missing = int(np.count_nonzero(~np.isfinite(rho)))
    if missing:
        log.warning("FL_Q delta=%g q=%g: %d of %d alpha cells have no tabulated root",
                    delta, q, missing, alpha_points)

    if np.any(np.isfinite(rho)):
        i = int(np.nanargmax(rho))

        def exact(a: float) -> float:
            return _solve_level(delta, level(a), table, tol) / a

        try:
            a_i = float(alphas[i])
            candidates.append((exact(a_i), a_i, level(a_i)))
            a_lo, a_hi = float(alphas[max(i - 1, 0)]), float(alphas[min(i + 1, alphas.size - 1)])
            a_ref, neg = minimize_bounded(lambda a: -exact(a), a_lo, a_hi, tol=ALPHA_REFINE_TOL * a_i)
            candidates.append((-neg, a_ref, level(a_ref)))
        except RipLabError as exc:
            missing += 1
            log.warning("FL_Q delta=%g q=%g: refinement failed: %s", delta, q, exc)

    best_rho, best_alpha, best_level = max(candidates, key=lambda c: c[0])
    log.debug("FL_Q delta=%g q=%g -> rho=%.10g alpha=%.6g", delta, q, best_rho, best_alpha)
    return LqSolution(rho=best_rho, alpha=best_alpha, q=q, level=best_level,
                      missing_cells=missing, factor=factor, cap=cap)


def rho_s_fl_q(delta: float, q: float, tol: float = CURVE_TOL) -> float:
    return solve_fl_q(delta, q, tol=tol).rho


def rho_s_fl_q_bounded(delta: float, q: float, factor: str, cap: float,
                       tol: float = CURVE_TOL) -> float:
    return solve_fl_q(delta, q, factor=factor, cap=cap, tol=tol).rho


# ─────────────────────────── curves ────────────────────────────
def default_delta_grid() -> np.ndarray:
    return np.linspace(0.05, 0.95, 91)


def _sample(method: CurveMethod, delta: float, q: float,
            constraint: Optional[Tuple[str, float]], tol: float) -> CurveSample:
    try:
        if method is CurveMethod.FL:
            rho = rho_s_fl(delta, tol)
            return CurveSample(delta, rho, mu_fl(PhasePoint(delta, rho)) - 1.0)
        if method is CurveMethod.RV:
            rho = rho_s_rv(delta, tol)
            return CurveSample(delta, rho, mu_rv(PhasePoint(delta, rho)) - 1.0)
        if method is CurveMethod.CANDES:
            rho = rho_s_candes(delta, tol)
            return CurveSample(delta, rho, candes_condition(PhasePoint(delta, rho)))
        factor, cap = constraint if method is CurveMethod.FL_Q_BOUNDED else (None, None)
        sol = solve_fl_q(delta, q, factor=factor, cap=cap, tol=tol)
        m = mu_fl(PhasePoint(delta, sol.alpha * sol.rho))
        if factor is None:
            resid = sol.alpha ** (0.5 - 1.0 / q) * m - 1.0
        else:
            resid = m - sol.level
        return CurveSample(delta, sol.rho, resid, alpha=sol.alpha)
    except RipLabError as exc:
        log.warning("%s sample at delta=%g failed: %s", method.value, delta, exc)
        return CurveSample(delta, math.nan, math.nan, error=str(exc))


def build_curve(method: CurveMethod | str, q: float = 1.0,
                constraint: Optional[Tuple[str, float]] = None,
                delta_grid: Optional[Sequence[float]] = None,
                tol: float = CURVE_TOL, threads: int = 1) -> TransitionCurve:
    method = CurveMethod.parse(method) if not isinstance(method, CurveMethod) else method
    q = _check_q(q)
    if method in (CurveMethod.FL, CurveMethod.RV, CurveMethod.CANDES) and q != 1.0:
        raise DomainError(f"method {method.value} is defined for q=1 only")
    if method is CurveMethod.FL_Q_BOUNDED:
        if constraint is None:
            raise DomainError("FL_Q_BOUNDED needs a (factor, cap) constraint")
        factor, cap = constraint
        if cap <= factor_floor(factor, q):
            raise InfeasibleError(f"cap {cap!r} on {factor} is not above its floor {factor_floor(factor, q):.6g}")
    elif constraint is not None:
        raise DomainError(f"method {method.value} takes no constraint")

    grid = np.asarray(default_delta_grid() if delta_grid is None else delta_grid, float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("delta grid must be a nonempty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("delta grid must be strictly increasing")
    if grid[0] <= 0 or grid[-1] > 1:
        raise DomainError("delta grid must lie in (0, 1]")

    log.info("curve %s q=%g over %d deltas (threads=%d)", method.value, q, grid.size, threads)

    def work(d: float) -> CurveSample:
        return _sample(method, float(d), q, constraint, tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = tuple(pool.map(work, grid))
    else:
        samples = tuple(work(d) for d in grid)

    if all(not s.ok for s in samples):
        raise NonConvergenceError(f"every {method.value} curve sample failed",
                                  diagnostics={"first_error": samples[0].error})
    return TransitionCurve(method=method, q=q, constraint=constraint,
                           samples=samples, solver_tol=tol)
