"""Shared fixtures and scenario builders for the test suite."""

import numpy as np
import pytest

from mcmimo.validate import (
    dense_interference_matrix,
    explicit_psi,
    realize_estimates,
    synthetic_scenario,
)

__all__ = [
    "synthetic_scenario",
    "realize_estimates",
    "explicit_psi",
    "dense_interference_matrix",
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def layout500():
    from mcmimo import build_layout

    return build_layout(500.0)
