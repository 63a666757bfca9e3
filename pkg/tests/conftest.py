import numpy as np
import pytest

from riplab.empirical_lab import sample_gaussian


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for key in ("RIPLAB_SEED", "RIPLAB_THREADS", "RIPLAB_TOL", "RIPLAB_MAX_N", "DEBUG"):
        monkeypatch.delenv(key, raising=False)


@pytest.fixture
def phase_grid():
    """The 50x50 (delta, rho) grid the bound contracts are checked on."""
    return np.linspace(1 / 20, 20 / 21, 50), np.linspace(0.01, 0.99, 50)


@pytest.fixture
def small_matrix():
    return sample_gaussian(10, 14, seed=3)
