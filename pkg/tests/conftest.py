"""
Pytest configuration and shared fixtures.
"""

import pytest
import sys
import os

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.calculations.census import build_S_sets
from app.calculations.characters import character_space, enumerate_chars
from app.calculations.epsilon import EpsilonEngine
from app.calculations.padic import make_extension


def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line("markers", "slow: marks tests as slow")
    config.addinivalue_line("markers", "integration: marks integration tests")


# ============================================================================
# EXTENSIONS
# ============================================================================

@pytest.fixture(scope="session")
def R3():
    """Q_3(sqrt 3): ramified, d = 1, omega(-1) = -1."""
    return make_extension(3, "sqrt-pi")


@pytest.fixture(scope="session")
def U3():
    """Unramified quadratic extension of Q_3."""
    return make_extension(3, "unramified")


@pytest.fixture(scope="session")
def G2():
    """Q_2(i): ramified, d = 2."""
    return make_extension(2, "sqrt(-1)")


@pytest.fixture(scope="session")
def E2():
    """Q_2(sqrt 2): ramified, d = 3."""
    return make_extension(2, "sqrt(2)")


@pytest.fixture(scope="session")
def U2():
    """Unramified quadratic extension of Q_2."""
    return make_extension(2, "unramified")


# ============================================================================
# CHARACTER SPACES AND ENGINES
# ============================================================================

class Setup:
    """Extension, enumeration, engine and S / S' strata at one level."""

    def __init__(self, ext, n_max):
        self.ext = ext
        self.space = character_space(ext, n_max)
        self.chars = enumerate_chars(ext, n_max, self.space)
        self.engine = EpsilonEngine(self.space)
        self._strata = None

    @property
    def strata(self):
        if self._strata is None:
            self._strata = build_S_sets(self.engine, self.chars)
        return self._strata


@pytest.fixture(scope="session")
def r3_setup(R3):
    return Setup(R3, 4)


@pytest.fixture(scope="session")
def g2_setup(G2):
    return Setup(G2, 4)


@pytest.fixture(scope="session")
def e2_setup(E2):
    return Setup(E2, 6)


@pytest.fixture(scope="session")
def u3_setup(U3):
    return Setup(U3, 2)


@pytest.fixture(scope="session")
def u2_setup(U2):
    return Setup(U2, 3)


@pytest.fixture
def cache_dir(tmp_path):
    """Empty table cache directory."""
    path = tmp_path / "cache"
    path.mkdir()
    return str(path)


class FlipAfter:
    """Sign flip that leaves the first `skip` lookups alone and negates the rest."""

    def __init__(self, skip):
        self.skip = skip
        self.seen = 0

    def __call__(self, chi):
        self.seen += 1
        return self.seen > self.skip


@pytest.fixture
def flip_after():
    """
    Factory for FlipAfter. With skip = number of characters, the S / S'
    strata come out right and every census sign is negated.
    """
    return FlipAfter
