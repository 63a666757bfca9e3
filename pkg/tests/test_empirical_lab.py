import math

import numpy as np
import pytest
import scipy.linalg
from scipy.special import comb

from riplab.empirical_lab import (EigMode, GaussianMatrix, empirical_strong_transition,
                                  empirical_vs_analytic, exhaustive_rip_extremes,
                                  gram_extreme_eigs, greedy_rip_path, greedy_rip_profile,
                                  greedy_rip_search, sample_gaussian, trial_rng, wishart_histogram)
from riplab.errors import DomainError
from riplab.rip_bounds import edelman_tail_integral_max, expected_extreme_eigenvalues

SEED = 20240521


# ───────────── sampling ─────────────
def test_sampling_is_deterministic():
    a = sample_gaussian(30, 60, SEED)
    b = sample_gaussian(30, 60, SEED)
    assert np.array_equal(a.entries, b.entries)
    assert not np.array_equal(a.entries, sample_gaussian(30, 60, SEED + 1).entries)
    assert not np.array_equal(a.entries, sample_gaussian(30, 60, SEED, index=1).entries)
    assert not a.entries.flags.writeable


def test_sampling_moments():
    m = sample_gaussian(100, 200, SEED)
    assert abs(m.entries.mean()) < 0.01
    cols = sample_gaussian(100, 2000, SEED).entries
    assert 0.97 < np.mean(np.sum(cols ** 2, axis=0)) < 1.03


def test_sampling_domain():
    with pytest.raises(DomainError):
        sample_gaussian(10, 5, SEED)
    with pytest.raises(DomainError):
        trial_rng(-1)


def test_mode_parse():
    assert EigMode.parse("max_eig") is EigMode.MAX_EIG
    with pytest.raises(DomainError):
        EigMode.parse("MID_EIG")


# ───────────── Gram eigenvalues ─────────────
def test_single_column_support(small_matrix):
    c = float(np.sum(small_matrix.entries[:, 4] ** 2))
    lo, hi = gram_extreme_eigs(small_matrix, [4])
    assert lo == pytest.approx(c, rel=1e-12)
    assert hi == pytest.approx(c, rel=1e-12)


def test_orthonormal_columns():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((10, 4)))
    lo, hi = gram_extreme_eigs(q, range(4))
    assert lo == pytest.approx(1.0, abs=1e-12)
    assert hi == pytest.approx(1.0, abs=1e-12)


def test_gram_against_dense_eigensolver():
    m = sample_gaussian(200, 400, SEED)
    support = list(range(0, 400, 8))
    cols = m.entries[:, support]
    w = scipy.linalg.eigh(cols.T @ cols, eigvals_only=True)
    lo, hi = gram_extreme_eigs(m, support)
    assert lo == pytest.approx(w[0], rel=1e-8)
    assert hi == pytest.approx(w[-1], rel=1e-8)


@pytest.mark.parametrize("support", [[], [1, 1], [0, 14], [-1, 2], list(range(11))])
def test_support_validation(small_matrix, support):
    with pytest.raises(DomainError):
        gram_extreme_eigs(small_matrix, support)


# ───────────── greedy search ─────────────
CASES = [(n, N, k) for n, N in ((6, 8), (10, 14), (12, 16)) for k in range(1, n)
         if comb(N, k, exact=True) <= 10_000]


@pytest.mark.parametrize("n,N,k", CASES)
def test_greedy_never_beats_exhaustive(n, N, k):
    m = sample_gaussian(n, N, SEED)
    ex = exhaustive_rip_extremes(m, k)
    hi = greedy_rip_search(m, k, EigMode.MAX_EIG, restarts=2, seed=SEED)
    lo = greedy_rip_search(m, k, EigMode.MIN_EIG, restarts=2, seed=SEED)
    assert hi.eigenvalue <= ex.max_eig
    assert lo.eigenvalue >= ex.min_eig
    assert len(hi.support) == k and len(set(hi.support)) == k


def test_greedy_exact_at_k1(small_matrix):
    ex = exhaustive_rip_extremes(small_matrix, 1)
    assert greedy_rip_search(small_matrix, 1, "MAX_EIG").eigenvalue == ex.max_eig
    assert greedy_rip_search(small_matrix, 1, "MIN_EIG").eigenvalue == ex.min_eig


def test_greedy_path_interlaces():
    m = sample_gaussian(40, 80, SEED)
    up = greedy_rip_path(m, 0, 20, EigMode.MAX_EIG)
    down = greedy_rip_path(m, 0, 20, EigMode.MIN_EIG)
    up_vals = np.array([v for _, v in up])
    down_vals = np.array([v for _, v in down])
    assert np.all(np.diff(up_vals) >= -1e-12)
    assert np.all(np.diff(down_vals) <= 1e-12)
    for (s0, _), (s1, _) in zip(up, up[1:]):
        assert set(s0) < set(s1) and len(s1) == len(s0) + 1


def test_greedy_is_deterministic():
    m = sample_gaussian(30, 90, SEED)
    a = greedy_rip_search(m, 8, EigMode.MAX_EIG, restarts=4, seed=1)
    b = greedy_rip_search(m, 8, EigMode.MAX_EIG, restarts=4, seed=1)
    assert (a.support, a.eigenvalue) == (b.support, b.eigenvalue)
    assert a.size.k == 8 and a.mode is EigMode.MAX_EIG


def test_greedy_profile_matches_search():
    m = sample_gaussian(20, 50, SEED)
    vals, sups = greedy_rip_profile(m, 6, EigMode.MIN_EIG, restarts=3, seed=5)
    rec = greedy_rip_search(m, 6, EigMode.MIN_EIG, restarts=3, seed=5)
    assert rec.eigenvalue == vals[-1] and rec.support == sups[-1]
    assert np.all(np.diff(vals) <= 1e-12)


def test_greedy_and_exhaustive_domains(small_matrix):
    with pytest.raises(DomainError):
        greedy_rip_search(small_matrix, 10, EigMode.MAX_EIG)
    with pytest.raises(DomainError):
        greedy_rip_search(small_matrix, 0, EigMode.MAX_EIG)
    with pytest.raises(DomainError):
        exhaustive_rip_extremes(sample_gaussian(20, 40, SEED), 6)


def test_plain_arrays_are_accepted():
    a = np.asarray(sample_gaussian(8, 12, SEED).entries)
    assert greedy_rip_search(a, 2, EigMode.MAX_EIG).eigenvalue > 0
    assert not isinstance(a, GaussianMatrix)


# ───────────── protocols ─────────────
def test_ratio_table_structure():
    table = empirical_vs_analytic(20, [30, 80], range(1, 6), trials=2, seed=SEED, restarts=1)
    assert len(table.cells) == 10
    assert len(table.records) == 2 * 5 * 2 * 2
    assert table.comparisons == 20
    for c in table.cells:
        assert c.L_analytic > 0 and c.U_analytic > 0
        if c.exceedances == 0:
            assert c.L_ratio >= 1.0 and c.U_ratio >= 1.0
    modes = {r.mode for r in table.records}
    assert modes == {EigMode.MIN_EIG, EigMode.MAX_EIG}


def test_ratio_table_domains():
    with pytest.raises(DomainError):
        empirical_vs_analytic(20, [30], [0, 1], trials=1)
    with pytest.raises(DomainError):
        empirical_vs_analytic(20, [10], [1], trials=1)


@pytest.mark.slow
def test_analytic_bounds_hold_at_desk_scale():
    n = 100
    N_list = [int(round(n / d)) for d in np.linspace(1 / 20, 20 / 21, 20)]
    table = empirical_vs_analytic(n, N_list, range(1, 21), trials=10, seed=SEED, restarts=2)
    assert len(table.cells) == 20 * 20
    assert table.exceedance_fraction <= 0.01
    assert 1.0 <= table.max_U_ratio <= 4.0


def test_wishart_means():
    n, rho = 200, 0.25
    samples = wishart_histogram(n, [rho], trials=200, seed=SEED)
    lo_ref, hi_ref = expected_extreme_eigenvalues(rho)
    mean_max = np.mean([s.max_eig for s in samples])
    mean_min = np.mean([s.min_eig for s in samples])
    assert abs(mean_max - hi_ref) / hi_ref <= 0.05
    assert abs(mean_min - lo_ref) / lo_ref <= 0.10
    assert all(s.k == 50 for s in samples)


def test_wishart_tail_below_density_bound():
    n, rho, t = 200, 0.25, 2.8
    samples = wishart_histogram(n, [rho], trials=200, seed=SEED)
    freq = np.mean([s.max_eig > t for s in samples])
    bound = edelman_tail_integral_max(50, n, t)
    assert freq <= bound + 3.0 * math.sqrt(max(bound, 1.0 / 200) / 200)


def test_wishart_is_reproducible_across_threads():
    a = wishart_histogram(40, [0.25, 0.5], trials=6, seed=SEED, threads=1)
    b = wishart_histogram(40, [0.25, 0.5], trials=6, seed=SEED, threads=3)
    assert a == b


def test_strong_transition_smoke():
    out = empirical_strong_transition(20, [40, 100], trials=1, seed=SEED, restarts=0)
    assert [s.N for s in out] == [40, 100]
    assert all(0.0 <= s.rho <= 0.5 for s in out)
