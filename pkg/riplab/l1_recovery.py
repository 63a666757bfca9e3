"""
l1_recovery.py — basis pursuit and recovery trials
==================================================

Decoder
-------
min ‖z‖₁ subject to Az = y, by over-relaxed ADMM on the splitting x = z
with x confined to the affine set {Az = y}:

    x  ← Π(z - u)                Π(v) = v - Aᵀ(AAᵀ)⁻¹(Av - y)
    x̂  ← α x + (1 - α) z
    z  ← soft(x̂ + u, 1/ρ)
    u  ← u + x̂ - z

The problem is solved for y/‖y‖ and rescaled. Π uses one Cholesky factor of
AAᵀ. ρ starts from the thresholding scale of the minimum-norm solution and
is rebalanced every few iterations from the relative primal and dual
residuals (the AutoRho rule). ρu is a subgradient of ‖z‖₁ after every
z-step, so every CERT_EVERY iterations the support of z is tested for
optimality: least squares on the support, then a dual vector ν with
A_Sᵀν = sign(w_S) taken closest to the ADMM estimate. ν/‖Aᵀν‖∞ is dual
feasible, which bounds the relative ℓ¹ gap by 1 - 1/‖Aᵀν‖∞.

`basis_pursuit_lp` solves the split-variable LP (u, v ≥ 0, z = u - v) with
HiGHS. It is the test reference, and `decode` falls back to it when ADMM
reaches its iteration cap.
"""

from __future__ import annotations

# stdlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

# third-party
import numpy as np
from scipy import linalg
from scipy.optimize import isotonic_regression, linprog

from .empirical_lab import GaussianMatrix, _entries, standard_normals, trial_rng
from .errors import DomainError, NonConvergenceError, RipLabError

log = logging.getLogger(__name__)

SUCCESS_THRESHOLD = 1e-4
DECODER_TOL = 1e-8
MAX_ITER = 50_000
TRIAL_MAX_ITER = 5_000
RELAX = 1.8
THRESHOLD_FRACTION = 0.1        # initial 1/ρ relative to ‖A⁺y‖∞
RHO_PERIOD = 10
RHO_RATIO = 1.2
RHO_SCALING = 1000.0
CERT_EVERY = 10


class SignalModel(str, Enum):
    UNIT = "UNIT"
    GAUSSIAN = "GAUSSIAN"
    RADEMACHER = "RADEMACHER"

    @classmethod
    def parse(cls, name: "SignalModel | str") -> "SignalModel":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().upper())
        except ValueError:
            raise DomainError(f"unknown signal model {name!r}") from None


# ─────────────────────────── types ────────────────────────────
@dataclass(frozen=True)
class SparseSignal:
    N: int
    support: Tuple[int, ...]
    values: Tuple[float, ...]
    model: SignalModel

    def __post_init__(self) -> None:
        if len(self.support) != len(self.values):
            raise DomainError("support and values differ in length")
        if len(self.support) > self.N:
            raise DomainError(f"k={len(self.support)} exceeds N={self.N}")
        if any(v == 0 for v in self.values):
            raise DomainError("sparse signal values must be nonzero")

    @property
    def k(self) -> int:
        return len(self.support)

    def dense(self) -> np.ndarray:
        x = np.zeros(self.N)
        x[list(self.support)] = self.values
        return x


@dataclass(frozen=True)
class BasisPursuitResult:
    x: np.ndarray
    iterations: int
    primal_residual: float      # ‖Ax - y‖₂
    polished: bool
    certified: bool = False     # support passed the dual-gap test
    fallback: bool = False      # solved by the LP after the ADMM cap


@dataclass(frozen=True)
class RecoveryOutcome:
    n: int
    N: int
    k: int
    seed: int
    trial: int
    relative_error: float
    solver_iterations: int
    threshold: float = SUCCESS_THRESHOLD
    reason: Optional[str] = None
    fallback: bool = False

    @property
    def success(self) -> bool:
        return self.relative_error <= self.threshold


@dataclass(frozen=True)
class SurfaceCell:
    delta: float
    n: int
    N: int
    k: int
    successes: int
    trials: int
    smoothed: float

    @property
    def rho(self) -> float:
        return self.k / self.n

    @property
    def fraction(self) -> float:
        return self.successes / self.trials


@dataclass(frozen=True)
class Crossing:
    delta: float
    rho: float
    censored: bool          # True when the column never drops below 1/2


@dataclass(frozen=True)
class TransitionSurface:
    n: int
    cells: Tuple[SurfaceCell, ...]
    crossings: Tuple[Crossing, ...]
    outcomes: Tuple[RecoveryOutcome, ...]

    def column(self, delta: float) -> List[SurfaceCell]:
        return [c for c in self.cells if c.delta == delta]


# ─────────────────────────── decoder ────────────────────────────
def _soft(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _polish(a: np.ndarray, b: np.ndarray, z: np.ndarray, x: np.ndarray, tol: float) -> Optional[np.ndarray]:
    supp = np.flatnonzero(z)
    if supp.size == 0 or supp.size > a.shape[0]:
        return None
    coef, *_ = np.linalg.lstsq(a[:, supp], b, rcond=None)
    w = np.zeros_like(x)
    w[supp] = coef
    if np.linalg.norm(a @ w - b) > tol:
        return None
    l1_x = np.abs(x).sum()
    if np.abs(w).sum() > l1_x + 1e-12 * max(1.0, l1_x):
        return None
    return w


def _certify(a: np.ndarray, b: np.ndarray, z: np.ndarray, g: np.ndarray, chol, tol: float) -> Optional[np.ndarray]:
    """
    Least-squares point on the support of z, returned only when a dual vector
    bounds its relative ℓ¹ gap by tol. `g` is the ADMM subgradient estimate ρu.
    """
    supp = np.flatnonzero(z)
    if supp.size == 0 or supp.size > a.shape[0]:
        return None
    a_s = a[:, supp]
    coef, *_ = np.linalg.lstsq(a_s, b, rcond=None)
    signs = np.sign(coef)
    if np.any(signs != np.sign(z[supp])):
        return None
    w = np.zeros(a.shape[1])
    w[supp] = coef
    if np.linalg.norm(a @ w - b) > tol:
        return None
    nu = linalg.cho_solve(chol, a @ g)
    fix, *_ = np.linalg.lstsq(a_s.T, signs - a_s.T @ nu, rcond=None)
    nu = nu + fix
    if np.max(np.abs(a_s.T @ nu - signs)) > 1e-9:
        return None
    m = float(np.max(np.abs(a.T @ nu)))
    if 1.0 - 1.0 / m > tol:
        return None
    return w


def _rho_factor(r: float, s: float) -> float:
    if r > RHO_RATIO * s:
        return RHO_SCALING if s == 0 else min(math.sqrt(r / s), RHO_SCALING)
    if s > RHO_RATIO * r:
        return 1.0 / RHO_SCALING if r == 0 else 1.0 / min(math.sqrt(s / r), RHO_SCALING)
    return 1.0


def basis_pursuit(matrix, y, tol: float = DECODER_TOL, max_iter: int = MAX_ITER) -> BasisPursuitResult:
    a = _entries(matrix)
    y = np.asarray(y, float)
    n, N = a.shape
    if y.shape != (n,):
        raise DomainError(f"measurement vector has shape {y.shape}, expected ({n},)")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")
    if not np.any(y):
        return BasisPursuitResult(np.zeros(N), 0, 0.0, False)

    try:
        chol = linalg.cho_factor(a @ a.T)
    except linalg.LinAlgError as exc:
        raise DomainError(f"A Aᵀ is not positive definite; rows must be independent ({exc})") from exc

    scale = float(np.linalg.norm(y))
    b = y / scale

    def project(v: np.ndarray) -> np.ndarray:
        return v - a.T @ linalg.cho_solve(chol, a @ v - b)

    def result(w: np.ndarray, it: int, polished: bool, certified: bool = False) -> BasisPursuitResult:
        w = w * scale
        return BasisPursuitResult(w, it, float(np.linalg.norm(a @ w - y)), polished, certified)

    x = project(np.zeros(N))
    rho = 1.0 / (THRESHOLD_FRACTION * float(np.max(np.abs(x))))
    z = x.copy()
    u = np.zeros(N)
    tiny = np.finfo(float).tiny
    r_rel = s_rel = math.inf
    for it in range(1, max_iter + 1):
        x = project(z - u)
        xr = RELAX * x + (1.0 - RELAX) * z
        z_old = z
        z = _soft(xr + u, 1.0 / rho)
        u = u + xr - z

        # relative residuals; ρ cancels in the dual one
        r_rel = float(np.linalg.norm(x - z) / max(np.linalg.norm(x), np.linalg.norm(z), tiny))
        s_rel = float(np.linalg.norm(z - z_old) / max(np.linalg.norm(u), tiny))
        converged = r_rel <= tol and s_rel <= tol

        if converged or it % CERT_EVERY == 0:
            w = _certify(a, b, z, rho * u, chol, tol)
            if w is not None:
                return result(w, it, True, True)
        if converged:
            w = _polish(a, b, z, x, tol)
            if w is not None:
                return result(w, it, True)
            return result(x, it, False)

        if it % RHO_PERIOD == 0:
            f = _rho_factor(r_rel, s_rel)
            rho *= f
            u /= f

    raise NonConvergenceError("basis pursuit did not converge", best=x * scale, iterations=max_iter,
                              diagnostics={"primal": r_rel, "dual": s_rel, "rho": rho})


def solve_basis_pursuit(matrix, y, tol: float = DECODER_TOL) -> np.ndarray:
    return basis_pursuit(matrix, y, tol).x


def basis_pursuit_lp(matrix, y) -> np.ndarray:
    """min 𝟙ᵀ(u+v) s.t. A(u-v) = y, u, v ≥ 0."""
    a = _entries(matrix)
    y = np.asarray(y, float)
    N = a.shape[1]
    res = linprog(np.ones(2 * N), A_eq=np.hstack([a, -a]), b_eq=y,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise NonConvergenceError(f"linprog failed: {res.message}", diagnostics={"status": res.status})
    return res.x[:N] - res.x[N:]


def decode(matrix, y, tol: float = DECODER_TOL, max_iter: int = MAX_ITER) -> BasisPursuitResult:
    """basis_pursuit, finished by the LP when ADMM reaches `max_iter`."""
    try:
        return basis_pursuit(matrix, y, tol, max_iter)
    except NonConvergenceError as exc:
        log.debug("ADMM stopped at its cap %s; solving the LP", exc.diagnostics)
        x = basis_pursuit_lp(matrix, y)
        res = float(np.linalg.norm(_entries(matrix) @ x - np.asarray(y, float)))
        return BasisPursuitResult(x, exc.iterations, res, False, fallback=True)


# ─────────────────────────── trials ────────────────────────────
def sample_sparse_signal(N: int, k: int, model: SignalModel | str, rng: np.random.Generator) -> SparseSignal:
    model = SignalModel.parse(model)
    if not (0 <= k <= N):
        raise DomainError(f"need 0 <= k <= N, got k={k}, N={N}")
    support = np.sort(rng.choice(N, size=k, replace=False)) if k else np.array([], dtype=int)
    if model is SignalModel.UNIT:
        values = np.ones(k)
    elif model is SignalModel.GAUSSIAN:
        values = standard_normals(rng, k)
    else:
        values = 2.0 * rng.integers(0, 2, size=k) - 1.0
    return SparseSignal(N, tuple(int(i) for i in support), tuple(float(v) for v in values), model)


def recovery_trial(n: int, N: int, k: int, model: SignalModel | str = SignalModel.UNIT,
                   seed: int = 0, trial: int = 0, threshold: float = SUCCESS_THRESHOLD,
                   tol: float = DECODER_TOL, max_iter: int = TRIAL_MAX_ITER) -> RecoveryOutcome:
    """One draw of (A, x), y = Ax, decoded by basis pursuit (LP after the ADMM cap)."""
    if not (0 <= k <= n <= N):
        raise DomainError(f"need 0 <= k <= n <= N, got (k, n, N)=({k}, {n}, {N})")
    rng = trial_rng(seed, n, N, k, trial)
    entries = standard_normals(rng, (n, N)) / math.sqrt(n)
    matrix = GaussianMatrix(n=n, N=N, seed=seed, entries=entries, index=trial)
    signal = sample_sparse_signal(N, k, model, rng)
    x = signal.dense()
    y = entries @ x
    try:
        res = decode(matrix, y, tol, max_iter)
    except RipLabError as exc:
        log.debug("decoder failed at (k, n, N)=(%d, %d, %d) trial %d: %s", k, n, N, trial, exc)
        return RecoveryOutcome(n, N, k, seed, trial, math.inf, getattr(exc, "iterations", 0),
                               threshold, reason=str(exc))
    scale = np.linalg.norm(x)
    err = np.linalg.norm(res.x - x)
    rel = float(err / scale) if scale > 0 else float(err)
    return RecoveryOutcome(n, N, k, seed, trial, rel, res.iterations, threshold, fallback=res.fallback)


def default_k_grid(n: int, points: int = 16, top: float = 0.9) -> np.ndarray:
    return np.unique(np.rint(np.linspace(1, top * n, points)).astype(int))


def _crossing(delta: float, rhos: np.ndarray, smooth: np.ndarray) -> Crossing:
    below = np.flatnonzero(smooth < 0.5)
    if below.size == 0:
        return Crossing(delta, float(rhos[-1]), True)
    i = int(below[0])
    if i == 0:
        return Crossing(delta, float(rhos[0]), True)
    f0, f1 = smooth[i - 1], smooth[i]
    r0, r1 = rhos[i - 1], rhos[i]
    return Crossing(delta, float(r0 + (f0 - 0.5) * (r1 - r0) / (f0 - f1)), False)


def empirical_weak_transition(delta_grid: Sequence[float], n: int, trials_per_cell: int,
                              seed: int = 0, k_grid: Optional[Sequence[int]] = None,
                              model: SignalModel | str = SignalModel.UNIT,
                              threshold: float = SUCCESS_THRESHOLD, tol: float = DECODER_TOL,
                              threads: int = 1, max_iter: int = TRIAL_MAX_ITER) -> TransitionSurface:
    """
    Success fraction over the (δ, ρ = k/n) cells with N = round(n/δ); the
    50% crossing per δ is read off the isotonic (nonincreasing in ρ) fit.
    """
    if trials_per_cell < 1:
        raise DomainError(f"trials_per_cell must be >= 1, got {trials_per_cell}")
    ks = np.asarray(default_k_grid(n) if k_grid is None else sorted(set(int(k) for k in k_grid)))
    if ks.size == 0 or ks[0] < 0 or ks[-1] > n:
        raise DomainError(f"k grid must lie in [0, n] = [0, {n}]")
    rhos = ks / n

    cells: List[SurfaceCell] = []
    crossings: List[Crossing] = []
    outcomes: List[RecoveryOutcome] = []
    for delta in delta_grid:
        if not (0.0 < delta <= 1.0):
            raise DomainError(f"delta must lie in (0, 1], got {delta!r}")
        N = max(n, int(round(n / delta)))
        jobs = [(int(k), t) for k in ks for t in range(trials_per_cell)]

        def one(job: Tuple[int, int], N: int = N) -> RecoveryOutcome:
            k, t = job
            return recovery_trial(n, N, k, model, seed, t, threshold, tol, max_iter)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                col = list(pool.map(one, jobs))
        else:
            col = [one(j) for j in jobs]
        outcomes.extend(col)
        lp = sum(o.fallback for o in col)
        if lp:
            log.info("delta=%g: %d of %d trials finished by the LP", delta, lp, len(col))

        wins = np.array([sum(o.success for o in col[i * trials_per_cell:(i + 1) * trials_per_cell])
                         for i in range(ks.size)])
        raw = wins / trials_per_cell
        smooth = isotonic_regression(raw, increasing=False).x
        if not np.allclose(raw, smooth):
            log.warning("delta=%g: isotonic smoothing adjusted %d of %d cells",
                        delta, int(np.count_nonzero(~np.isclose(raw, smooth))), raw.size)
        cells.extend(SurfaceCell(float(delta), n, N, int(k), int(w), trials_per_cell, float(s))
                     for k, w, s in zip(ks, wins, smooth))
        crossings.append(_crossing(float(delta), rhos, smooth))
        log.info("delta=%g N=%d: 50%% crossing at rho=%.4g%s", delta, N, crossings[-1].rho,
                 " (censored)" if crossings[-1].censored else "")
    return TransitionSurface(n=n, cells=tuple(cells), crossings=tuple(crossings), outcomes=tuple(outcomes))
