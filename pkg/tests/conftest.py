import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from llgsav import spectral as sp

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def grid16():
    return sp.Grid.square(16)


def random_unit_field(rng, grid, smooth=3):
    """Smooth random unit vector field built from a few low modes."""
    x, y = grid.coords()
    v = np.zeros((3,) + grid.shape)
    for c in range(3):
        for _ in range(smooth):
            kx, ky = rng.integers(-2, 3, size=2)
            v[c] += rng.standard_normal() * np.cos(kx * x + ky * y + rng.uniform(0, 2 * np.pi))
    v[2] += 2.5  # keep away from the zero vector before normalising
    return v / np.sqrt(np.sum(v * v, axis=0))
