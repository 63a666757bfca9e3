"""
empirical_lab.py — Monte-Carlo checks of the RIP bounds
=======================================================

• sample_gaussian          n×N matrix, entries 𝒩(0, 1/n), keyed by (seed, n, N, index)
• gram_extreme_eigs        extreme eigenvalues of A_Kᵀ A_K
• greedy_rip_search        forward greedy support growth; lower bounds on L(k), U(k)
• exhaustive_rip_extremes  all C(N,k) supports (toy sizes only)
• empirical_vs_analytic    analytic 𝓛, 𝓤 against the greedy lower bounds
• wishart_histogram        raw extreme eigenvalues of n×k Wishart draws
• empirical_strong_transition  μ^FL with greedy L(2k), U(2k) in place of 𝓛, 𝓤

Every random stream is a Philox generator keyed by a SeedSequence of the
master seed and the trial coordinates, so results do not depend on thread
scheduling. Normals come from the inverse normal CDF of 53-bit uniforms.

Greedy scoring
--------------
Adding column c to support K borders G = A_Kᵀ A_K with b = A_Kᵀ c and
γ = ‖c‖². With G = V diag(w) Vᵀ and z = Vᵀ b the new extreme eigenvalue is
the outer root of

    f(λ) = λ - γ - Σ z_i² / (λ - w_i)

which is bracketed by [max(w_max, γ), max(w_max, γ) + ‖z‖] (largest) or
[min(w_min, γ) - ‖z‖, min(w_min, γ)] (smallest). Candidates are scored
together with a safeguarded Newton iteration started from the 2×2 Ritz
value; the chosen support is then re-evaluated with a dense eigensolve.
"""

from __future__ import annotations

# stdlib
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

# third-party
import numpy as np
from scipy.special import comb, ndtri

from .errors import DomainError
from .phase_transitions import mu_fl_from_constants
from .rip_bounds import PhasePoint, ProblemSize, bound_L, bound_U

log = logging.getLogger(__name__)

NEWTON_STEPS = 16
EXHAUSTIVE_LIMIT = 10_000
DEFAULT_RESTARTS = 8
_U53 = float(2**53)


class EigMode(str, Enum):
    MIN_EIG = "MIN_EIG"
    MAX_EIG = "MAX_EIG"

    @classmethod
    def parse(cls, name: "EigMode | str") -> "EigMode":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().upper())
        except ValueError:
            raise DomainError(f"unknown eigenvalue mode {name!r}") from None


# ─────────────────────────── types ────────────────────────────
@dataclass(frozen=True)
class GaussianMatrix:
    n: int
    N: int
    seed: int
    entries: np.ndarray
    index: int = 0


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    size: ProblemSize
    mode: EigMode
    support: Tuple[int, ...]
    eigenvalue: float
    wall_time: float
    trial: int = 0


@dataclass(frozen=True)
class ExhaustiveExtremes:
    min_eig: float
    max_eig: float
    argmin: Tuple[int, ...]
    argmax: Tuple[int, ...]


@dataclass(frozen=True)
class RatioCell:
    n: int
    N: int
    k: int
    L_analytic: float
    U_analytic: float
    L_empirical: float       # best (largest) greedy lower bound over trials
    U_empirical: float
    exceedances: int         # trials with L_emp > 𝓛 or U_emp > 𝓤
    trials: int

    @property
    def delta(self) -> float:
        return self.n / self.N

    @property
    def rho(self) -> float:
        return self.k / self.n

    @property
    def L_ratio(self) -> float:
        return self.L_analytic / self.L_empirical if self.L_empirical > 0 else math.inf

    @property
    def U_ratio(self) -> float:
        return self.U_analytic / self.U_empirical if self.U_empirical > 0 else math.inf


@dataclass(frozen=True)
class RatioTable:
    cells: Tuple[RatioCell, ...]
    records: Tuple[TrialRecord, ...]

    @property
    def comparisons(self) -> int:
        return sum(c.trials for c in self.cells)

    @property
    def exceedances(self) -> int:
        return sum(c.exceedances for c in self.cells)

    @property
    def exceedance_fraction(self) -> float:
        return self.exceedances / self.comparisons if self.comparisons else 0.0

    @property
    def max_L_ratio(self) -> float:
        return max((c.L_ratio for c in self.cells if c.exceedances == 0), default=math.nan)

    @property
    def max_U_ratio(self) -> float:
        return max((c.U_ratio for c in self.cells if c.exceedances == 0), default=math.nan)


@dataclass(frozen=True)
class WishartSample:
    rho: float
    k: int
    trial: int
    min_eig: float
    max_eig: float


@dataclass(frozen=True)
class StrongTransitionSample:
    n: int
    N: int
    rho: float      # largest k/n with μ^FL(L_emp(2k), U_emp(2k)) < 1, 0 if none

    @property
    def delta(self) -> float:
        return self.n / self.N


# ─────────────────────────── sampling ────────────────────────────
def trial_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based stream for (seed, *keys)."""
    if seed < 0:
        raise DomainError(f"seed must be nonnegative, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def standard_normals(rng: np.random.Generator, shape) -> np.ndarray:
    u = (rng.integers(0, 2**53, size=shape, dtype=np.uint64).astype(float) + 0.5) / _U53
    return ndtri(u)


def sample_gaussian(n: int, N: int, seed: int, index: int = 0) -> GaussianMatrix:
    if not (1 <= n <= N):
        raise DomainError(f"need 1 <= n <= N, got n={n}, N={N}")
    entries = standard_normals(trial_rng(seed, n, N, index), (n, N)) / math.sqrt(n)
    entries.setflags(write=False)
    return GaussianMatrix(n=n, N=N, seed=int(seed), entries=entries, index=index)


def _entries(matrix) -> np.ndarray:
    a = matrix.entries if isinstance(matrix, GaussianMatrix) else np.asarray(matrix, float)
    if a.ndim != 2:
        raise DomainError("matrix must be two-dimensional")
    return a


# ─────────────────────────── eigenvalues ────────────────────────────
def _check_support(support: Sequence[int], n: int, N: int) -> Tuple[int, ...]:
    s = tuple(sorted(int(i) for i in support))
    if not s:
        raise DomainError("support must be nonempty")
    if len(set(s)) != len(s):
        raise DomainError(f"support indices must be distinct: {s}")
    if s[0] < 0 or s[-1] >= N:
        raise DomainError(f"support indices must lie in [0, {N})")
    if len(s) > n:
        raise DomainError(f"support size {len(s)} exceeds n={n}")
    return s


def gram_extreme_eigs(matrix, support: Sequence[int]) -> Tuple[float, float]:
    """(min, max) eigenvalue of the Gram matrix of the selected columns."""
    a = _entries(matrix)
    s = _check_support(support, *a.shape)
    cols = a[:, s]
    w = np.linalg.eigvalsh(cols.T @ cols)
    return max(float(w[0]), 0.0), float(w[-1])


def _extreme(matrix, support, mode: EigMode) -> float:
    lo, hi = gram_extreme_eigs(matrix, support)
    return hi if mode is EigMode.MAX_EIG else lo


def _bordered_extreme(w: np.ndarray, Z: np.ndarray, gamma: np.ndarray, largest: bool) -> np.ndarray:
    """Outer root of the secular equation for every candidate column."""
    Z2 = Z * Z
    znorm = np.sqrt(Z2.sum(axis=0))
    if largest:
        edge, zi = w[-1], Z2[-1]
        base = np.maximum(edge, gamma)
        lo, hi = base, base + znorm
        x = 0.5 * (edge + gamma) + np.sqrt(0.25 * (edge - gamma) ** 2 + zi)
    else:
        edge, zi = w[0], Z2[0]
        base = np.minimum(edge, gamma)
        lo, hi = base - znorm, base
        x = 0.5 * (edge + gamma) - np.sqrt(0.25 * (edge - gamma) ** 2 + zi)
    x = np.clip(x, lo, hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(NEWTON_STEPS):
            d = x[None, :] - w[:, None]
            r = np.where(Z2 > 0, Z2 / d, 0.0)
            f = x - gamma - r.sum(axis=0)
            fp = 1.0 + np.where(Z2 > 0, r / d, 0.0).sum(axis=0)
            step = np.where(np.isfinite(f) & (fp > 0), f / fp, 0.0)
            x = np.clip(x - step, lo, hi)
    return x


def greedy_rip_path(matrix, first: int, k: int, mode: EigMode | str) -> List[Tuple[Tuple[int, ...], float]]:
    """Forward greedy path from one start column; entry j holds the size-(j+1) support."""
    mode = EigMode.parse(mode)
    a = _entries(matrix)
    n, N = a.shape
    if not (1 <= k <= min(n, N)):
        raise DomainError(f"need 1 <= k <= min(n, N), got k={k}")
    if not (0 <= first < N):
        raise DomainError(f"start column {first} outside [0, {N})")
    norms = np.einsum("ij,ij->j", a, a)
    support = [int(first)]
    path = [((int(first),), _extreme(a, support, mode))]
    free = np.ones(N, dtype=bool)
    free[first] = False
    for _ in range(1, k):
        B = a[:, support]
        w, V = np.linalg.eigh(B.T @ B)
        cand = np.flatnonzero(free)
        Z = V.T @ (B.T @ a[:, cand])
        score = _bordered_extreme(w, Z, norms[cand], largest=mode is EigMode.MAX_EIG)
        j = int(cand[np.argmax(score) if mode is EigMode.MAX_EIG else np.argmin(score)])
        support.append(j)
        free[j] = False
        path.append((tuple(sorted(support)), _extreme(a, support, mode)))
    return path


def greedy_rip_profile(matrix, k_max: int, mode: EigMode | str, restarts: int = DEFAULT_RESTARTS,
                       seed: int = 0) -> Tuple[np.ndarray, List[Tuple[int, ...]]]:
    """Best value and support for every k ≤ k_max over the default and random starts."""
    mode = EigMode.parse(mode)
    a = _entries(matrix)
    N = a.shape[1]
    if restarts < 0:
        raise DomainError(f"restarts must be >= 0, got {restarts}")
    norms = np.einsum("ij,ij->j", a, a)
    starts = [int(np.argmax(norms) if mode is EigMode.MAX_EIG else np.argmin(norms))]
    if restarts:
        rng = trial_rng(seed, N, 0 if mode is EigMode.MIN_EIG else 1)
        starts += [int(j) for j in rng.choice(N, size=min(restarts, N), replace=False)]

    better = np.greater if mode is EigMode.MAX_EIG else np.less
    best_val = np.full(k_max, -np.inf if mode is EigMode.MAX_EIG else np.inf)
    best_sup: List[Tuple[int, ...]] = [()] * k_max
    for s in dict.fromkeys(starts):
        for j, (sup, val) in enumerate(greedy_rip_path(a, s, k_max, mode)):
            if better(val, best_val[j]):
                best_val[j], best_sup[j] = val, sup
    return best_val, best_sup


def greedy_rip_search(matrix, k: int, mode: EigMode | str, restarts: int = DEFAULT_RESTARTS,
                      seed: int = 0) -> TrialRecord:
    """Greedy lower bound on the extremal eigenvalue over all size-k supports."""
    mode = EigMode.parse(mode)
    a = _entries(matrix)
    n, N = a.shape
    if not (1 <= k <= n - 1):
        raise DomainError(f"need 1 <= k <= n-1, got k={k}, n={n}")
    t0 = time.perf_counter()
    vals, sups = greedy_rip_profile(a, k, mode, restarts, seed)
    return TrialRecord(seed=int(getattr(matrix, "seed", seed)), size=ProblemSize(k, n, N), mode=mode,
                       support=sups[-1], eigenvalue=float(vals[-1]),
                       wall_time=time.perf_counter() - t0,
                       trial=int(getattr(matrix, "index", 0)))


def exhaustive_rip_extremes(matrix, k: int) -> ExhaustiveExtremes:
    a = _entries(matrix)
    n, N = a.shape
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got k={k}")
    count = comb(N, k, exact=True)
    if count > EXHAUSTIVE_LIMIT:
        raise DomainError(f"C({N}, {k}) = {count} supports exceeds the enumeration limit {EXHAUSTIVE_LIMIT}")
    lo, hi = math.inf, -math.inf
    arg_lo: Tuple[int, ...] = ()
    arg_hi: Tuple[int, ...] = ()
    for sup in itertools.combinations(range(N), k):
        e_lo, e_hi = gram_extreme_eigs(a, sup)
        if e_lo < lo:
            lo, arg_lo = e_lo, sup
        if e_hi > hi:
            hi, arg_hi = e_hi, sup
    return ExhaustiveExtremes(min_eig=lo, max_eig=hi, argmin=arg_lo, argmax=arg_hi)


# ─────────────────────────── protocols ────────────────────────────
def _map(fn, items: Iterable, threads: int) -> list:
    items = list(items)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _matrix_profiles(n: int, N: int, k_max: int, seed: int, trial: int, restarts: int):
    t0 = time.perf_counter()
    m = sample_gaussian(n, N, seed, trial)
    lo, lo_sup = greedy_rip_profile(m, k_max, EigMode.MIN_EIG, restarts, seed)
    hi, hi_sup = greedy_rip_profile(m, k_max, EigMode.MAX_EIG, restarts, seed)
    return lo, lo_sup, hi, hi_sup, time.perf_counter() - t0


def empirical_vs_analytic(n: int, N_list: Sequence[int], k_range: Sequence[int], trials: int,
                          seed: int = 0, restarts: int = DEFAULT_RESTARTS,
                          threads: int = 1) -> RatioTable:
    """
    Analytic 𝓛(δ,ρ), 𝓤(δ,ρ) against the best greedy L(k,n,N), U(k,n,N)
    for every (N, k) cell. Trial records carry one MIN_EIG and one MAX_EIG
    row per (N, trial, k).
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1 or ks[-1] > n - 1:
        raise DomainError(f"k range must lie in [1, n-1] = [1, {n - 1}]")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    cells: List[RatioCell] = []
    records: List[TrialRecord] = []
    for N in N_list:
        if N < n:
            raise DomainError(f"N={N} is below n={n}")
        log.info("empirical n=%d N=%d: %d trials, k<=%d", n, N, trials, ks[-1])
        runs = _map(lambda t: _matrix_profiles(n, N, ks[-1], seed, t, restarts), range(trials), threads)
        for k in ks:
            pt = PhasePoint(n / N, k / n)
            L_an, U_an = bound_L(pt), bound_U(pt)
            L_best, U_best, exceed = -math.inf, -math.inf, 0
            for t, (lo, lo_sup, hi, hi_sup, wall) in enumerate(runs):
                L_emp, U_emp = 1.0 - lo[k - 1], hi[k - 1] - 1.0
                L_best, U_best = max(L_best, L_emp), max(U_best, U_emp)
                if L_emp > L_an or U_emp > U_an:
                    exceed += 1
                size = ProblemSize(k, n, N)
                records.append(TrialRecord(seed, size, EigMode.MIN_EIG, lo_sup[k - 1], float(lo[k - 1]), wall, t))
                records.append(TrialRecord(seed, size, EigMode.MAX_EIG, hi_sup[k - 1], float(hi[k - 1]), wall, t))
            if exceed:
                log.warning("finite-n exceedance at n=%d N=%d k=%d in %d of %d trials", n, N, k, exceed, trials)
            cells.append(RatioCell(n, N, k, L_an, U_an, L_best, U_best, exceed, trials))
    return RatioTable(cells=tuple(cells), records=tuple(records))


def wishart_histogram(n: int, rho_list: Sequence[float], trials: int, seed: int = 0,
                      threads: int = 1) -> List[WishartSample]:
    """Extreme eigenvalues of XᵀX, X an n×k matrix of 𝒩(0, 1/n) entries, k = round(ρn)."""
    if n < 1 or trials < 1:
        raise DomainError(f"need n >= 1 and trials >= 1, got n={n}, trials={trials}")
    out: List[WishartSample] = []
    for rho in rho_list:
        if not (0.0 < rho <= 1.0):
            raise DomainError(f"rho must lie in (0, 1], got {rho!r}")
        k = max(1, int(round(rho * n)))

        def one(t: int, k: int = k, rho: float = float(rho)) -> WishartSample:
            x = standard_normals(trial_rng(seed, n, k, t), (n, k)) / math.sqrt(n)
            w = np.linalg.eigvalsh(x.T @ x)
            return WishartSample(rho, k, t, max(float(w[0]), 0.0), float(w[-1]))

        out.extend(_map(one, range(trials), threads))
    return out


def empirical_strong_transition(n: int, N_list: Sequence[int], trials: int, seed: int = 0,
                                restarts: int = DEFAULT_RESTARTS,
                                threads: int = 1) -> List[StrongTransitionSample]:
    if n < 3:
        raise DomainError(f"n must be >= 3, got {n}")
    k2_max = n - 1
    out: List[StrongTransitionSample] = []
    for N in N_list:
        runs = _map(lambda t: _matrix_profiles(n, N, k2_max, seed, t, restarts), range(trials), threads)
        L = np.max([1.0 - r[0] for r in runs], axis=0).clip(min=0.0)
        U = np.max([r[2] - 1.0 for r in runs], axis=0).clip(min=0.0)
        best = 0
        for k in range(1, k2_max // 2 + 1):
            if mu_fl_from_constants(L[2 * k - 1], U[2 * k - 1]) < 1.0:
                best = k
        out.append(StrongTransitionSample(n, N, best / n))
        log.info("empirical strong transition n=%d N=%d: rho=%.4g", n, N, best / n)
    return out
