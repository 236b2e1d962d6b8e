import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landau_hilbert.collision import LinearizedOperator
from landau_hilbert.grid import VelocityGrid
from landau_hilbert.linsolve import auto_preconditioner, batched_cg, reference_preconditioner
from landau_hilbert.maxwellian import FluidMoments


def _spd_batch(rng, batch, n):
    A = rng.standard_normal((batch, n**3, n**3))
    return np.einsum("bij,bkj->bik", A, A) + n**3 * np.eye(n**3)[None]


def _apply(A, n):
    def f(x):
        flat = x.reshape(x.shape[0], -1)
        return np.einsum("bij,bj->bi", A, flat).reshape(x.shape)

    return f


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_cg_matches_dense_solve(seed):
    rng = np.random.default_rng(seed)
    n = 2
    A = _spd_batch(rng, 3, n)
    b = rng.standard_normal((3, n, n, n))
    x, info = batched_cg(_apply(A, n), b, tol=1e-12)
    ref = np.linalg.solve(A, b.reshape(3, -1)[..., None])[..., 0].reshape(b.shape)
    assert np.allclose(x, ref, rtol=1e-9, atol=1e-11)
    assert info.ritz_min > 0
    assert info.ritz_max >= info.ritz_min


def test_zero_and_negligible_cells():
    rng = np.random.default_rng(0)
    n = 2
    A = _spd_batch(rng, 2, n)
    b = rng.standard_normal((2, n, n, n))
    b[1] = 1e-40
    x, info = batched_cg(_apply(A, n), b, tol=1e-12)
    assert np.all(x[1] == 0)
    assert np.all(info.residual <= 1e-12)


def test_preconditioned_shifted_solve():
    g = VelocityGrid(n_v=8, v_max=5.0)
    m = FluidMoments(np.array([1.0, 1.1]), np.zeros((2, 3)), np.array([1.0, 1.05]))
    op = LinearizedOperator.local(m, g)
    rhs = np.random.default_rng(1).standard_normal((2,) + g.shape) * op.sqrtW
    tau = 5.0
    pre = auto_preconditioner(g, m.T)
    assert pre is not None
    x0, i0 = batched_cg(lambda z: z + tau * op(z), rhs, tol=1e-10)
    x1, i1 = batched_cg(lambda z: z + tau * op(z), rhs, tol=1e-10, precond=lambda z: pre.shifted(z, m.rho, tau))
    assert np.allclose(x0, x1, atol=1e-8 * np.max(np.abs(x0)))
    assert i1.iterations < i0.iterations


def test_reference_preconditioner_is_cached_and_psd():
    g = VelocityGrid(n_v=8, v_max=5.0)
    a = reference_preconditioner(g, 1.0)
    assert a is reference_preconditioner(g, 1.0)
    assert a.eigenvalues[0] > -1e-10 * a.eigenvalues[-1]
    assert np.sum(a.eigenvalues < 1e-8 * a.eigenvalues[-1]) == 5


def test_policy_switches():
    big = VelocityGrid(n_v=24)
    assert auto_preconditioner(big, np.array(1.0)) is None
    assert auto_preconditioner(VelocityGrid(n_v=8), np.array(1.0), "none") is None
    with pytest.raises(ValueError):
        auto_preconditioner(VelocityGrid(n_v=8), np.array(1.0), "bogus")
