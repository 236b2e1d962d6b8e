import warnings

import numpy as np
import pytest

from landau_hilbert.fluid import acoustic_state, advance_fluid
from landau_hilbert.grid import SpatialGrid, VelocityGrid
from landau_hilbert.hilbert import build_coefficients


@pytest.fixture(scope="session")
def vgrid12():
    return VelocityGrid(n_v=12, v_max=6.0)


@pytest.fixture(scope="session")
def vgrid16():
    return VelocityGrid(n_v=16, v_max=6.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def cascade(branch="landau", k=2, n_x=8, n_v=12, n_snap=9, amplitude=0.05, cfl=0.5):
    sg = SpatialGrid(n_x=n_x)
    vg = VelocityGrid(n_v=n_v, v_max=6.0)
    s0 = acoustic_state(sg, amplitude, maxwell=branch == "vml")
    dt = cfl * sg.spacing / vg.v_max
    traj = advance_fluid(s0, dt / 2, 2 * (n_snap - 1), sg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_coefficients(traj, sg, vg, k=k, branch=branch)


@pytest.fixture(scope="session")
def es_landau():
    return cascade("landau")


@pytest.fixture(scope="session")
def es_vml():
    return cascade("vml")
