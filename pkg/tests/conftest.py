import pytest

from dirac_elliptic import ProblemSpec, RadialGrid, estimate_c2, iterate_minimal
from dirac_elliptic.mountainpass import EnergyContext, mountain_pass


@pytest.fixture(scope="session")
def grid():
    return RadialGrid()


@pytest.fixture(scope="session")
def spec():
    return ProblemSpec()


@pytest.fixture(scope="session")
def barrier(spec, grid):
    return estimate_c2(spec, grid)


@pytest.fixture(scope="session")
def half_spec(spec, barrier):
    return spec.with_(k=barrier.kp / 2)


@pytest.fixture(scope="session")
def u_half(half_spec, grid, barrier):
    rep = iterate_minimal(half_spec, grid, barrier=barrier)
    assert rep.converged
    return rep.solution


@pytest.fixture(scope="session")
def ctx(u_half, half_spec, grid):
    return EnergyContext.build(u_half, half_spec, grid)


@pytest.fixture(scope="session")
def mp_report(ctx):
    return mountain_pass(ctx, seed=0)
