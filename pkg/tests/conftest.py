import pytest

from hslab.constants import Params
from hslab.geometry import round_sphere
from hslab.solver import sweep_alpha

SWEEP_ALPHAS = (1.0, 4.0, 16.0, 64.0, 256.0)


@pytest.fixture(scope="session")
def sphere_sweep():
    """Warm-started n=4, s=1 sweep on the round sphere at default resolution."""
    p = Params(4, 1.0)
    return p, sweep_alpha(round_sphere(4), p, SWEEP_ALPHAS)
