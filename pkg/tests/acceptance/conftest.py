"""
Shared fixtures for the simulation-scale acceptance checks.
"""

import numpy as np
import pytest


def pytest_collection_modifyitems(items):
    for item in items:
        if "acceptance" in str(item.fspath):
            item.add_marker(pytest.mark.slow)


@pytest.fixture
def random_spd():
    """Factory for well-conditioned random SPD matrices."""
    def make(rng, p, ridge=None):
        A = rng.standard_normal((p, p))
        return A @ A.T / p + (ridge if ridge is not None else 0.5) * np.eye(p)
    return make


@pytest.fixture
def class_rows():
    """Factory for labeled Gaussian rows from a list of precision matrices."""
    def make(rng, omegas, n):
        X, y = [], []
        for c, omega in enumerate(omegas):
            X.append(rng.multivariate_normal(np.zeros(omega.shape[0]), np.linalg.inv(omega), n))
            y.extend([c] * n)
        return np.vstack(X), np.array(y)
    return make
