import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import cascade
from landau_hilbert.collision import LinearizedOperator, get_operator
from landau_hilbert.fluid import acoustic_state, advance_fluid, divergence
from landau_hilbert.grid import SpatialGrid, VelocityGrid, integrate_v
from landau_hilbert.hilbert import (
    SamplingError,
    SolvabilityWarning,
    build_coefficients,
    conserved_moments,
    decay_profile,
    expansion_residual,
    first_order_micro,
    force_term,
    invert_LM,
    order_defects,
    remainder_forcing,
    time_derivative,
    zero_flux_gradient,
)
from landau_hilbert.maxwellian import FluidMoments, log_local_maxwellian
from landau_hilbert.projection import build_local_basis, complement_PM

SMALL = VelocityGrid(n_v=8, v_max=5.0)


def _cell_problem(rng, grid=VelocityGrid(n_v=12, v_max=6.0)):
    m = FluidMoments(np.array([1.1]), np.array([[0.2, -0.1, 0.05]]), np.array([0.9]))
    basis = build_local_basis(m, grid)
    op = LinearizedOperator(grid, log_local_maxwellian(m, grid))
    r = rng.standard_normal((1,) + grid.shape) * basis.sqrtM
    return basis, op, complement_PM(r, basis)


# ---------------------------------------------------------------- inversion


def test_invert_zero_rhs_gives_zero(rng):
    basis, op, r = _cell_problem(rng)
    assert np.all(invert_LM(np.zeros_like(r), basis, op) == 0.0)


def test_invert_round_trip(rng):
    basis, op, r = _cell_problem(rng)
    g = invert_LM(r, basis, op)
    assert np.linalg.norm(op(g) - r) <= 1e-8 * np.linalg.norm(r)
    assert np.max(np.abs(basis.coefficients(g))) <= 1e-10 * np.linalg.norm(g)


def test_invert_null_rhs_warns_and_returns_zero(rng):
    basis, op, _ = _cell_problem(rng)
    chi0 = basis.chi[:, 0]
    with pytest.warns(SolvabilityWarning):
        g = invert_LM(chi0, basis, op)
    assert np.max(np.abs(g)) <= 1e-12


def test_invert_micro_rhs_is_silent(rng):
    basis, op, r = _cell_problem(rng)
    with warnings.catch_warnings():
        warnings.simplefilter("error", SolvabilityWarning)
        invert_LM(r, basis, op)


# ---------------------------------------------------------------- time differencing


def test_time_derivative_exact_on_quartics():
    dt = 0.13
    t = dt * np.arange(9)
    series = np.stack([1.0 - 2 * t + 0.5 * t**2 + 3 * t**3 - t**4, t**4])
    exact = np.stack([-2 + t + 9 * t**2 - 4 * t**3, 4 * t**3])
    got = time_derivative(series.T, dt).T
    assert np.max(np.abs(got - exact)) <= 1e-10


def test_time_derivative_needs_five_samples():
    with pytest.raises(SamplingError):
        time_derivative(np.zeros((4, 3)), 0.1)


# ---------------------------------------------------------------- cascade set-up guards


@pytest.fixture(scope="module")
def short_trajectory():
    sg = SpatialGrid(n_x=4)
    return sg, advance_fluid(acoustic_state(sg, 0.01), 0.05, 8, sg)


@pytest.mark.parametrize("kwargs", [dict(k=1), dict(stride=3), dict(branch="boltzmann")])
def test_build_rejects_bad_arguments(short_trajectory, kwargs):
    sg, traj = short_trajectory
    with pytest.raises(ValueError):
        build_coefficients(traj, sg, SMALL, **kwargs)


def test_build_rejects_too_few_snapshots(short_trajectory):
    sg, traj = short_trajectory
    with pytest.raises(SamplingError):
        build_coefficients(traj, sg, SMALL, stride=4)


def test_vml_needs_fields(short_trajectory):
    sg, traj = short_trajectory
    with pytest.raises(ValueError):
        build_coefficients(traj, sg, SMALL, branch="vml")


# ---------------------------------------------------------------- equilibrium


@pytest.fixture(scope="module")
def es_rest():
    return cascade("landau", amplitude=0.0, n_x=4, n_v=8)


def test_equilibrium_coefficients_vanish(es_rest):
    assert np.max(np.abs(es_rest.F[1:])) <= 1e-14
    assert np.max(np.abs(es_rest.dF[1:])) <= 1e-14


def test_equilibrium_residual_vanishes(es_rest):
    for eps in (0.1, 0.01):
        assert expansion_residual(es_rest, eps, 2) <= 1e-13


# ---------------------------------------------------------------- cascade structure


@pytest.mark.parametrize("name", ["es_landau", "es_vml"])
def test_conserved_moments_track_U(name, request):
    es = request.getfixturevalue(name)
    for n in range(1, es.order + 1):
        for i in range(len(es.times)):
            got = conserved_moments(es.F[n, i], es.vgrid)
            assert np.max(np.abs(got - es.U[n, i])) <= 1e-12 * max(1.0, np.max(np.abs(es.U[n])))


@pytest.mark.parametrize("name", ["es_landau", "es_vml"])
def test_forcing_routes_agree(name, request):
    es = request.getfixturevalue(name)
    for i in (2, 4):
        a = remainder_forcing(es, 0.1, i)
        b = remainder_forcing(es, 0.1, i, route="residual")
        assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(b))


def test_forcing_rejects_unknown_route(es_landau):
    with pytest.raises(ValueError):
        remainder_forcing(es_landau, 0.1, 0, route="nope")


def test_leading_defect_is_zero(es_landau):
    # C(M, M) = 0 exactly in the weighted flux form.
    D = order_defects(es_landau, 3)
    assert np.max(np.abs(D[-1])) <= 1e-13 * np.max(np.abs(es_landau.F[0]))


def test_default_initial_moments_are_zero(es_landau):
    assert np.max(np.abs(es_landau.U[1:, 0])) == 0.0


def test_decay_profile_shape(es_landau):
    prof = decay_profile(es_landau, 1, 4)
    assert prof.shape == (3,)
    assert np.all(np.isfinite(prof))
    assert prof[0] > prof[2]


def test_vml_gauss_law_order_by_order(es_vml):
    es = es_vml
    for n in range(1, es.order + 1):
        for i in range(len(es.times)):
            r = divergence(es.E[n, i], es.sgrid) + 4 * np.pi * integrate_v(es.F[n, i], es.vgrid)
            assert np.max(np.abs(r)) <= 1e-6, (n, i)


def test_vml_magnetic_field_divergence_free(es_vml):
    for n in range(es_vml.order + 1):
        for B in es_vml.B[n]:
            assert np.max(np.abs(divergence(B, es_vml.sgrid))) <= 1e-12


def test_vml_residual_order(es_vml):
    eps = np.array([0.1, 0.05, 0.025])
    res = np.array([expansion_residual(es_vml, e, 4) for e in eps])
    slope = np.polyfit(np.log(eps), np.log(res), 1)[0]
    assert slope >= 2.5


def test_first_order_micro_is_microscopic():
    sg = SpatialGrid(n_x=4)
    s = acoustic_state(sg, 0.05)
    F1 = first_order_micro(s, sg, SMALL)
    m = s.moments
    basis = build_local_basis(m, SMALL)
    sqrtM = np.exp(0.5 * log_local_maxwellian(m, SMALL))
    assert np.max(np.abs(basis.coefficients(F1 / sqrtM))) <= 1e-10 * np.max(np.abs(F1 / sqrtM))
    assert np.max(np.abs(F1)) > 0


# ---------------------------------------------------------------- Lorentz force discretization


fields = arrays(np.float64, (2,) + SMALL.shape, elements=st.floats(-1, 1))


@settings(max_examples=25, deadline=None)
@given(fields)
def test_zero_flux_gradient_integrates_to_zero(F):
    dF = zero_flux_gradient(F, SMALL)
    assert np.max(np.abs(np.sum(dF, axis=(-3, -2, -1)))) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(fields)
def test_zero_flux_gradient_is_centered_inside(F):
    ref = get_operator(SMALL).gradient(F)
    got = zero_flux_gradient(F, SMALL)
    inner = (slice(None), slice(None), slice(1, -1), slice(1, -1), slice(1, -1))
    assert np.allclose(got[inner], ref[inner], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(fields, arrays(np.float64, (2, 3), elements=st.floats(-2, 2)), arrays(np.float64, (2, 3), elements=st.floats(-2, 2)))
def test_force_term_conserves_mass(F, E, B):
    mass = integrate_v(force_term(E, B, F, SMALL), SMALL)
    assert np.max(np.abs(mass)) <= 1e-11 * (1 + np.max(np.abs(F)))
