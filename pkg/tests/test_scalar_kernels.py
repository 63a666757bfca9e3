import math

import numpy as np
import pytest

from riplab.errors import BracketError, DomainError, NonConvergenceError
from riplab.scalar_kernels import (Probability, bisect_array, find_root_bracketed, log_binomial,
                                   log_gamma, minimize_bounded, psi_max, psi_min, rate_evaluation,
                                   rate_max, rate_min, rate_min_log, shannon_entropy)

P_GRID = np.linspace(0.0, 1.0, 1001)


# ───────────── entropy ─────────────
def test_entropy_values():
    assert shannon_entropy(0.5) == pytest.approx(math.log(2), rel=1e-15)
    assert shannon_entropy(0.1) == pytest.approx(0.3250830, abs=1e-7)
    assert shannon_entropy(0.0) == 0.0
    assert shannon_entropy(1.0) == 0.0
    assert shannon_entropy(Probability(0.5)) == shannon_entropy(0.5)


def test_entropy_symmetric_and_peaked():
    h = shannon_entropy(P_GRID)
    np.testing.assert_allclose(h, shannon_entropy(1.0 - P_GRID), rtol=1e-12, atol=1e-15)
    assert int(np.argmax(h)) == 500
    assert np.all(h >= 0.0)


@pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
def test_entropy_domain(p):
    with pytest.raises(DomainError):
        shannon_entropy(p)


def test_domain_error_is_value_error():
    with pytest.raises(ValueError):
        shannon_entropy(2.0)
    with pytest.raises(DomainError):
        Probability(1.2)


# ───────────── ψ and rates ─────────────
def test_psi_values():
    assert psi_min(0.5, 0.5) == pytest.approx(0.3465736, abs=1e-7)
    assert psi_max(1.0, 1.0) == pytest.approx(0.5, rel=1e-15)


def test_psi_monotone_on_their_windows():
    rho = 0.3
    lam_hi = np.linspace(1.0 + rho, 20.0, 500)
    assert np.all(np.diff(psi_max(lam_hi, rho)) < 0)
    lam_lo = np.linspace(1e-6, 1.0 - rho, 500)
    assert np.all(np.diff(psi_min(lam_lo, rho)) > 0)


def test_rate_values():
    assert rate_max(1.0, 1.0, 2.0) == pytest.approx(math.log(2), rel=1e-14)
    assert rate_min(1.0, 0.5, 0.5) == pytest.approx(1.0397208, abs=1e-7)
    expected = shannon_entropy(0.25) + 0.5 * psi_max(1.5, 0.5)
    assert rate_max(0.5, 0.5, 1.5) == pytest.approx(expected, rel=1e-14)
    assert rate_max(0.5, 0.5, 1.5) > 0


def test_rates_fall_off_the_window():
    assert rate_max(0.5, 0.5, 1e6) < -1e5
    assert rate_min(0.5, 0.5, 1e-300) < 0


def test_rate_min_log_matches_rate_min():
    lam = np.array([1e-8, 1e-3, 0.2, 0.5])
    np.testing.assert_allclose(rate_min_log(0.4, 0.3, np.log(lam)), rate_min(0.4, 0.3, lam),
                               rtol=1e-12, atol=1e-14)
    # finite where λ itself would underflow
    assert np.isfinite(rate_min_log(0.05, 0.99, -900.0))


@pytest.mark.parametrize("lam,rho", [(0.0, 0.5), (-1.0, 0.5), (0.5, 1.0), (0.5, 0.0)])
def test_psi_min_domain(lam, rho):
    with pytest.raises(DomainError):
        psi_min(lam, rho)


def test_rate_delta_domain():
    with pytest.raises(DomainError):
        rate_max(0.0, 0.5, 2.0)
    with pytest.raises(DomainError):
        rate_min(1.5, 0.5, 0.1)


def test_rate_evaluation():
    ev = rate_evaluation("max", 1.0, 1.0)
    assert ev.kind == "max" and ev.value == pytest.approx(0.5)
    assert rate_evaluation("min", 0.5, 0.5).value == pytest.approx(0.3465736, abs=1e-7)
    with pytest.raises(DomainError):
        rate_evaluation("median", 1.0, 0.5)


def test_pure_functions_repeat_bitwise():
    assert psi_max(3.7, 0.21) == psi_max(3.7, 0.21)
    assert rate_min(0.3, 0.4, 0.01) == rate_min(0.3, 0.4, 0.01)


# ───────────── gamma ─────────────
def test_log_gamma():
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-13)
    assert log_gamma(10.0) == pytest.approx(math.log(362880), rel=1e-13)
    with pytest.raises(DomainError):
        log_gamma(0.0)


@pytest.mark.parametrize("N,k", [(10, 3), (50, 25), (200, 2), (1000, 17), (7, 0), (7, 7)])
def test_log_binomial_matches_exact(N, k):
    assert log_binomial(N, k) == pytest.approx(math.log(math.comb(N, k)), rel=1e-12, abs=1e-12)


def test_log_binomial_large_and_domain():
    assert math.isfinite(log_binomial(10**6, 500))
    with pytest.raises(DomainError):
        log_binomial(3, 5)


# ───────────── roots ─────────────
@pytest.mark.parametrize("method", ["bisect", "brent"])
def test_root_reference_cases(method):
    assert find_root_bracketed(lambda x: x - 2.0, 0.0, 10.0, tol=1e-12, method=method) == pytest.approx(2.0, abs=1e-11)
    assert find_root_bracketed(math.log, 0.5, 2.0, tol=1e-12, method=method) == pytest.approx(1.0, abs=1e-11)


def test_lambda_max_root_against_sign_scan():
    def f(lam):
        return rate_max(1.0, 1.0, lam)

    root = find_root_bracketed(f, 2.0, 50.0, tol=1e-12)
    assert root == pytest.approx(5.3566, abs=1e-4)
    grid = np.linspace(2.0, 50.0, 480001)
    vals = rate_max(1.0, 1.0, grid)
    i = int(np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0])
    assert grid[i] <= root <= grid[i + 1]


def test_root_is_idempotent_on_its_bracket():
    r = find_root_bracketed(lambda x: x ** 3 - 3.0, 0.0, 5.0, tol=1e-12)
    again = find_root_bracketed(lambda x: x ** 3 - 3.0, r - 1e-9, r + 1e-9, tol=1e-12)
    assert again == pytest.approx(r, abs=2e-12)


def test_root_endpoint_zero():
    assert find_root_bracketed(lambda x: x - 1.0, 1.0, 3.0) == 1.0


def test_root_errors():
    with pytest.raises(BracketError) as exc:
        find_root_bracketed(lambda x: x * x + 1.0, -1.0, 1.0)
    assert exc.value.lo == -1.0 and exc.value.hi == 1.0
    with pytest.raises(DomainError):
        find_root_bracketed(lambda x: x, -1.0, 1.0, tol=0.0)
    with pytest.raises(DomainError):
        find_root_bracketed(lambda x: x - 0.3, -1.0, 1.0, method="newton")
    with pytest.raises(NonConvergenceError):
        find_root_bracketed(lambda x: x - 0.123456789, 0.0, 1.0, tol=1e-15, maxiter=3)


def test_bisect_array():
    c = np.array([1.0, 4.0, 9.0])
    roots = bisect_array(lambda x: x * x - c, np.zeros(3), np.full(3, 10.0), tol=1e-12)
    np.testing.assert_allclose(roots, [1.0, 2.0, 3.0], atol=1e-9)
    with pytest.raises(BracketError):
        bisect_array(lambda x: x * x + 1.0, np.zeros(2), np.ones(2))


def test_minimize_bounded():
    x, fx = minimize_bounded(lambda v: (v - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-6)
    assert fx == pytest.approx(0.0, abs=1e-10)
