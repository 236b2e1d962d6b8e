import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from landau_hilbert.collision import LinearizedOperator
from landau_hilbert.diagnostics import (
    X_weight,
    Y_weight,
    convergence_metric,
    d_norm,
    d_norm_sq,
    dissipation_gram,
    energy_functionals,
    fit_lower_bound,
    spectral_gap,
    weighted_norms,
)
from landau_hilbert.grid import SpatialGrid, VelocityGrid
from landau_hilbert.maxwellian import R_GAS, FluidMoments, GlobalMaxwellianParams, global_maxwellian, local_maxwellian
from landau_hilbert.projection import build_global_basis, complement_PM
from landau_hilbert.remainder import global_params, initial_state

VG = VelocityGrid(n_v=8, v_max=5.0)
P = GlobalMaxwellianParams(0.9)
SG = SpatialGrid(n_x=8)

samples = arrays(np.float64, VG.shape, elements=st.floats(-1, 1))


def _inner(a, b):
    return np.sum(a * b, axis=(-3, -2, -1)) * VG.weight


# ---------------------------------------------------------------- D-norm


def test_d_norm_of_zero():
    assert d_norm(np.zeros(VG.shape), P, VG) == 0.0


@settings(max_examples=30, deadline=None)
@given(samples, st.floats(-5, 5).filter(lambda a: a == 0 or abs(a) > 1e-6))
def test_d_norm_nonnegative_and_homogeneous(g, a):
    n = d_norm(g, P, VG)
    assert n >= 0.0
    assert d_norm(a * g, P, VG) == pytest.approx(abs(a) * n, rel=1e-10, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(samples, samples)
def test_dissipation_gram_is_the_d_norm_form(a, b):
    assert _inner(a, dissipation_gram(a, P, VG)) == pytest.approx(d_norm_sq(a, P, VG), rel=1e-10, abs=1e-14)
    assert _inner(a, dissipation_gram(b, P, VG)) == pytest.approx(_inner(dissipation_gram(a, P, VG), b), rel=1e-9, abs=1e-13)


def test_lower_bound_constant_is_positive(rng):
    c = fit_lower_bound(rng.standard_normal((50,) + VG.shape), P, VG)
    assert c > 0.0


# ---------------------------------------------------------------- time weights


def test_X_decreases_and_Y_is_its_log_rate():
    t = np.linspace(0.0, 5.0, 11)
    X = np.array([X_weight(s, P) for s in t])
    assert np.all(np.diff(X) < 0)
    for s in (0.0, 0.7, 3.0):
        h = 1e-5
        fd = -(np.log(X_weight(s + h, P)) - np.log(X_weight(s - h, P))) / (2 * h) if s > 0 else None
        if fd is not None:
            assert Y_weight(s, P) == pytest.approx(fd, rel=1e-7)
    assert Y_weight(0.0, P) == pytest.approx(1.0 / (8.0 * R_GAS * P.T_c * np.e))


def test_weighted_norms_zero_and_monotone_in_time(rng):
    x = SG.mesh[0][:, None, None, None]
    h = np.cos(x) * rng.standard_normal(VG.shape) * np.exp(-VG.speed2)
    zero = weighted_norms(np.zeros_like(h), 0.0, 3.0, P, SG, VG)
    assert all(v == 0.0 for v in zero.values + zero.d_values)
    early = weighted_norms(h, 0.0, 3.0, P, SG, VG)
    late = weighted_norms(h, 2.0, 3.0, P, SG, VG)
    assert early.finite and late.finite
    assert all(b <= a for a, b in zip(early.values, late.values))
    assert all(b <= a for a, b in zip(early.d_values, late.d_values))


# ---------------------------------------------------------------- energy functionals


def _dx(a, sg, order):
    # Derivatives compose first-order ones, so the Nyquist mode drops for every order >= 1.
    k = sg.wavenumbers.copy()
    k[sg.n_x // 2] = 0.0
    return np.real(np.fft.ifft(np.fft.fft(a, axis=0) * ((1j * k) ** order).reshape((-1,) + (1,) * (a.ndim - 1)), axis=0))


def _energy_by_terms(st, es, p):
    """Landau (E, D) assembled term by term with FFT derivatives and the Gram form of the D-norm."""
    sg, vg, eps = es.sgrid, es.vgrid, st.eps
    snap = es.snapshots[st.index]
    fm = complement_PM(st.f, snap.basis)
    hm = complement_PM(st.h, build_global_basis(p, vg))
    w = sg.cell_volume * vg.weight
    E = D = 0.0
    for i in range(3):
        f_i, h_i, fm_i, hm_i = (_dx(a, sg, i) for a in (st.f, st.h, fm, hm))
        E += eps**i * (np.sum(f_i**2) * w + eps * np.sum(h_i**2) * w)
        D += eps ** (i - 1) * (
            np.sum(fm_i * dissipation_gram(fm_i, p, vg)) * w + eps * np.sum(hm_i * dissipation_gram(hm_i, p, vg)) * w
        )
    return E, D


def test_landau_energy_matches_term_by_term(es_landau, rng):
    p = global_params(es_landau)
    snap = es_landau.snapshots[0]
    x = es_landau.sgrid.mesh[0][:, None, None, None]
    FR = 0.01 * (np.sin(x) + np.cos(3 * x)) * snap.M * (1 + rng.standard_normal(snap.M.shape[1:]))
    st = initial_state(es_landau, 0.1, FR, p)
    row = energy_functionals(st, es_landau, p)
    E, D = _energy_by_terms(st, es_landau, p)
    assert row.energy == pytest.approx(E, rel=1e-10)
    assert row.dissipation == pytest.approx(D, rel=1e-10)


@pytest.mark.parametrize("name", ["es_landau", "es_vml"])
def test_zero_remainder_has_zero_energy(name, request):
    es = request.getfixturevalue(name)
    p = global_params(es)
    row = energy_functionals(initial_state(es, 0.1, p=p), es, p)
    assert row.energy == 0.0 and row.dissipation == 0.0 and row.finite


# ---------------------------------------------------------------- convergence metric


def test_convergence_metric_zero_on_maxwellian_and_linear():
    x = SG.mesh[0]
    m = FluidMoments(1.0 + 0.1 * np.sin(x), np.zeros(SG.shape + (3,)), 1.0 + 0.05 * np.cos(x))
    M = local_maxwellian(m, VG)
    assert convergence_metric(M, m, SG, VG) <= 1e-13
    bump = np.sqrt(M) * np.cos(2 * x)[:, None, None, None] * VG.mesh[0]
    a = convergence_metric(M + 1e-3 * bump, m, SG, VG)
    b = convergence_metric(M + 2e-3 * bump, m, SG, VG)
    assert b == pytest.approx(2 * a, rel=1e-10)


# ---------------------------------------------------------------- spectral gap and coercivity


@pytest.fixture(scope="module")
def gap():
    return spectral_gap(P, VG)


def test_spectral_gap_structure(gap):
    assert gap.n_null == 5
    assert gap.delta > 0.1
    assert gap.null_angle <= 1e-3
    assert np.all(np.diff(gap.eigenvalues) >= -1e-12)


def test_coercivity_over_random_samples(gap, rng):
    L = LinearizedOperator.global_(P, VG)
    basis = build_global_basis(P, VG)
    h = rng.standard_normal((100,) + VG.shape) * global_maxwellian(P, VG) ** 0.25
    ratio = _inner(L(h), h) / d_norm_sq(complement_PM(h, basis), P, VG)
    assert np.min(ratio) >= gap.delta


def test_linearization_about_global_state_matches_L(rng):
    m = FluidMoments(np.array(1.0), np.zeros(3), np.array(P.T_c))
    g = rng.standard_normal((3,) + VG.shape)
    a = LinearizedOperator.local(m, VG)(g)
    b = LinearizedOperator.global_(P, VG)(g)
    assert np.array_equal(a, b)
