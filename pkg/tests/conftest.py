import numpy as np
import pytest

from modwave.grid import TorusGrid
from modwave.systems import make_lambda_omega, analytic_wavetrain
from modwave.wavetrain import solve_profile, continue_family


@pytest.fixture(scope="session")
def lo_system():
    return make_lambda_omega(1.0, 0.5)


@pytest.fixture(scope="session")
def lo_system_glancing():
    return make_lambda_omega(1.0, 0.0)


@pytest.fixture(scope="session")
def grid64():
    return TorusGrid(64)


@pytest.fixture(scope="session")
def wt_05(lo_system, grid64):
    aw = analytic_wavetrain(lo_system, 0.5)
    return solve_profile(lo_system, 0.5, aw.profile(grid64), aw.omega)


@pytest.fixture(scope="session")
def wt_04(lo_system, grid64):
    aw = analytic_wavetrain(lo_system, 0.4)
    return solve_profile(lo_system, 0.4, aw.profile(grid64), aw.omega)


@pytest.fixture(scope="session")
def wt_glancing(lo_system_glancing, grid64):
    aw = analytic_wavetrain(lo_system_glancing, 0.5)
    return solve_profile(lo_system_glancing, 0.5, aw.profile(grid64), aw.omega)


@pytest.fixture(scope="session")
def family_main(lo_system, grid64):
    return continue_family(lo_system, 0.2, 0.7, 25, grid=grid64)
