import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landau_hilbert.grid import VelocityGrid
from landau_hilbert.maxwellian import FluidMoments, GlobalMaxwellianParams, global_maxwellian
from landau_hilbert.projection import (
    build_global_basis,
    build_local_basis,
    complement_PM,
    hydro_fields,
    macro_from_fields,
    project_P,
    project_PM,
    project_Pv,
)


@pytest.fixture
def basis(vgrid12):
    m = FluidMoments(np.array([1.0, 1.3]), np.array([[0.1, 0.0, -0.2], [0.0, 0.3, 0.0]]), np.array([1.0, 0.9]))
    return build_local_basis(m, vgrid12)


def test_basis_orthonormal(basis):
    gram = np.einsum("xavwz,xbvwz->xab", basis.chi, basis.chi) * basis.grid.weight
    assert np.allclose(gram, np.eye(5)[None], atol=1e-13)


def test_basis_fixed_by_projection(basis):
    assert np.allclose(project_PM(basis.chi[:, 2], basis), basis.chi[:, 2], atol=1e-14)


def test_idempotent_and_orthogonal(basis, rng):
    f = rng.standard_normal((2,) + basis.grid.shape)
    Pf = project_PM(f, basis)
    assert np.max(np.abs(project_PM(Pf, basis) - Pf)) < 1e-12
    assert np.max(np.abs(basis.coefficients(complement_PM(f, basis)))) < 1e-12


def test_global_projection(vgrid12, rng):
    p = GlobalMaxwellianParams(0.9)
    smu = np.sqrt(global_maxwellian(p, vgrid12))
    assert np.allclose(project_P(smu, p, vgrid12), smu, atol=1e-14)
    h = rng.standard_normal(vgrid12.shape)
    Ih = h - project_P(h, p, vgrid12)
    assert np.allclose(Ih - project_P(Ih, p, vgrid12), Ih, atol=1e-13)
    assert np.max(np.abs(build_global_basis(p, vgrid12).coefficients(Ih))) < 1e-13


def test_hydro_fields_read_off(basis):
    rho = basis.moments.rho
    f = basis.raw[:, 0] * np.sqrt(rho)[:, None, None, None]
    r, u, T = hydro_fields(f, basis)
    assert np.allclose(r, rho, rtol=1e-12)
    assert np.allclose(u, 0, atol=1e-12)
    assert np.allclose(T, 0, atol=1e-12)


def test_hydro_fields_of_micro_field(basis, rng):
    f = complement_PM(rng.standard_normal((2,) + basis.grid.shape) * basis.sqrtM, basis)
    for a in hydro_fields(f, basis):
        assert np.max(np.abs(a)) < 1e-12


def test_hydro_round_trip(basis, rng):
    f = rng.standard_normal((2,) + basis.grid.shape) * basis.sqrtM
    rebuilt = macro_from_fields(*hydro_fields(f, basis), basis)
    assert np.max(np.abs(rebuilt - project_PM(f, basis))) < 1e-10 * np.max(np.abs(f))


def test_radial_projection(vgrid12):
    v = vgrid12.mesh
    assert np.allclose(project_Pv(v, vgrid12), v, atol=1e-13)
    tangential = np.stack([np.zeros_like(v[0]), -v[2], v[1]])  # v x e_1
    assert np.max(np.abs(project_Pv(tangential, vgrid12))) < 1e-13


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_radial_split_is_orthogonal(seed):
    g = VelocityGrid(n_v=8, v_max=3.0)
    G = np.random.default_rng(seed).standard_normal((3,) + g.shape)
    P = project_Pv(G, g)
    assert np.allclose(np.sum(P**2, 0) + np.sum((G - P) ** 2, 0), np.sum(G**2, 0), rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.7, 1.4), st.floats(-0.5, 0.5))
def test_projection_idempotent_any_background(rho, T, u):
    g = VelocityGrid(n_v=8, v_max=5.0)
    b = build_local_basis(FluidMoments(np.array(rho), np.array([u, -u, 0.0]), np.array(T)), g)
    f = np.cos(g.mesh[0] + g.mesh[1]) * b.sqrtM
    Pf = project_PM(f, b)
    assert np.max(np.abs(project_PM(Pf, b) - Pf)) < 1e-12
