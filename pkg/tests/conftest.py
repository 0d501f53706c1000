import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from poiseuille_lab.discretization import Grid, ModeField
from poiseuille_lab.kernels import available_backends

settings.register_profile("lab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(rng, grid: Grid, k: int, smooth: bool = True) -> ModeField:
    """Random Dirichlet profile, a mix of localized bumps when ``smooth``."""
    if smooth:
        c = rng.uniform(-2, 2, 3)
        s = rng.uniform(0.5, 1.5, 3)
        a = rng.normal(size=3) + 1j * rng.normal(size=3)
        v = np.sum(a * np.exp(-((grid.y[:, None] - c) / s) ** 2), axis=1)
    else:
        v = rng.normal(size=grid.Ny) + 1j * rng.normal(size=grid.Ny)
    return ModeField(k, v, grid)
