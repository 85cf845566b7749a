"""Pytest configuration and shared fixtures."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the path so tests can import the pi_quant package
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from pi_quant.rotation_codec import precision_config  # noqa: E402


@pytest.fixture(params=[1, 2, 3, 4], ids=lambda lam: f"lambda{lam}")
def cfg(request):
    """Fixture for every supported precision."""
    return precision_config(request.param)


@pytest.fixture
def cfg2():
    """Fixture for the default precision."""
    return precision_config(2)


@pytest.fixture
def rng():
    """Fixture for a seeded generator."""
    return np.random.default_rng(1234)
