import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landau_hilbert.grid import SpatialGrid, VelocityGrid, integrate_v, integrate_x, integrate_xv, spectral_derivative
from landau_hilbert.maxwellian import GlobalMaxwellianParams, global_maxwellian

# Product midpoint rule for the unit Maxwellian at n_v = 128, v_max = 6 (scripts/oracles.py).
MU_MASS_N128 = 0.9999999999994168


def test_zero_integrand():
    g = VelocityGrid(n_v=8, v_max=1.0)
    assert integrate_v(np.zeros(g.shape), g) == 0.0


def test_cube_volume():
    g = VelocityGrid(n_v=8, v_max=1.0)
    assert integrate_v(np.ones(g.shape), g) == pytest.approx(8.0, rel=1e-14)


def test_global_maxwellian_mass_against_refined_oracle():
    g = VelocityGrid(n_v=32, v_max=6.0)
    mass = integrate_v(global_maxwellian(GlobalMaxwellianParams(1.0), g), g)
    assert abs(mass - 1.0) < 1e-6
    assert abs(mass - MU_MASS_N128) < 1e-6


def test_phase_space_volume():
    sg = SpatialGrid(n_x=6, length=2.5, dim_x=2)
    vg = VelocityGrid(n_v=8, v_max=1.5)
    assert integrate_xv(np.ones(sg.shape + vg.shape), sg, vg) == pytest.approx(2.5**2 * 3.0**3, rel=1e-13)


def test_phase_space_maxwellian_unit_box():
    sg = SpatialGrid(n_x=5, length=1.0)
    vg = VelocityGrid(n_v=32, v_max=6.0)
    mu = np.broadcast_to(global_maxwellian(GlobalMaxwellianParams(1.0), vg), sg.shape + vg.shape)
    assert abs(integrate_xv(np.array(mu), sg, vg) - 1.0) < 1e-6


def test_shape_mismatch_rejected():
    sg = SpatialGrid(n_x=4)
    vg = VelocityGrid(n_v=8)
    with pytest.raises(ValueError):
        integrate_xv(np.ones(vg.shape), sg, vg)


@pytest.mark.parametrize("kwargs", [{"n_v": 4}, {"n_v": 8.5}, {"v_max": 0.0}, {"dim_v": 2}])
def test_velocity_grid_validation(kwargs):
    with pytest.raises(ValueError):
        VelocityGrid(**kwargs)


def test_velocity_nodes_symmetric_and_avoid_origin():
    g = VelocityGrid(n_v=12, v_max=6.0)
    assert np.allclose(g.nodes, -g.nodes[::-1], atol=0, rtol=0)
    assert np.min(np.abs(g.nodes)) == pytest.approx(0.5 * g.spacing)


def test_spectral_derivative_of_trig_mode():
    sg = SpatialGrid(n_x=16)
    x = sg.nodes
    d = spectral_derivative(np.sin(3 * x), sg)
    assert np.max(np.abs(d - 3 * np.cos(3 * x))) < 1e-12
    d2 = spectral_derivative(np.sin(3 * x), sg, order=2)
    assert np.max(np.abs(d2 + 9 * np.sin(3 * x))) < 1e-11


def test_spectral_derivative_integrates_to_zero():
    sg = SpatialGrid(n_x=12)
    a = np.exp(np.cos(sg.nodes))
    assert abs(integrate_x(spectral_derivative(a, sg), sg)) < 1e-13


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 5.0))
def test_integration_is_linear(a, b):
    g = VelocityGrid(n_v=8, v_max=2.0)
    f = np.cos(g.mesh[0]) + g.speed2
    h = np.sin(g.mesh[1]) ** 2
    lhs = integrate_v(a * f + b * h, g)
    rhs = a * integrate_v(f, g) + b * integrate_v(h, g)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
