"""Norms, energy functionals, convergence metrics and the spectral gap of L.

The dissipation norm about mu is

    |g|_D^2 = int sigma^{ij} d_i g d_j g dv + (4 R^2 T_c^2)^-1 int sigma^{ij} v_i v_j g^2 dv

with sigma = phi * mu and centered velocity differences; ``dissipation_gram``
is its exact discrete Gram operator, so Rayleigh quotients against it are
consistent with ``d_norm``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import subspace_angles
from scipy.sparse.linalg import LinearOperator, lobpcg

from .collision import LinearizedOperator, get_operator
from .grid import SpatialGrid, VelocityGrid, spectral_derivative
from .maxwellian import R_GAS, FluidMoments, GlobalMaxwellianParams, global_maxwellian, log_local_maxwellian
from .projection import build_global_basis, complement_PM

VEL = (-3, -2, -1)


# ---------------------------------------------------------------- D-norm


@lru_cache(maxsize=8)
def _sigma_mu(p: GlobalMaxwellianParams, grid: VelocityGrid) -> tuple[np.ndarray, np.ndarray]:
    sigma = get_operator(grid).sigma_conv(global_maxwellian(p, grid))
    v = grid.mesh
    svv = np.einsum("ij...,i...,j...->...", sigma, v, v) / (4.0 * R_GAS**2 * p.T_c**2)
    return sigma, svv


def _centered_T(y: np.ndarray, d: int, h: float) -> np.ndarray:
    """Transpose of the centered difference used by ``LandauOperator.gradient``."""
    ax = y.ndim - 3 + d
    y = np.moveaxis(y, ax, 0)
    out = np.zeros_like(y)
    # interior rows j = 1..n-2: (a[j+1] - a[j-1]) / 2h
    out[2:] += y[1:-1] / (2 * h)
    out[:-2] -= y[1:-1] / (2 * h)
    # edge rows: (a1 - a0)/h and (a[-1] - a[-2])/h
    out[1] += y[0] / h
    out[0] -= y[0] / h
    out[-1] += y[-1] / h
    out[-2] -= y[-1] / h
    return np.moveaxis(out, 0, ax)


def d_norm_sq(g: np.ndarray, p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    """|g|_D^2 per leading index."""
    sigma, svv = _sigma_mu(p, grid)
    dg = get_operator(grid).gradient(g)
    dens = np.einsum("ij...,i...,j...->...", sigma, dg, dg) + svv * g * g
    return np.sum(dens, axis=VEL) * grid.weight


def d_norm(g: np.ndarray, p: GlobalMaxwellianParams, grid: VelocityGrid, sgrid: SpatialGrid | None = None) -> float:
    """|g|_D, or ||g||_D over x when ``sgrid`` is given."""
    vals = d_norm_sq(g, p, grid)
    vol = 1.0 if sgrid is None else sgrid.cell_volume
    return float(np.sqrt(np.sum(vals) * vol))


def dissipation_gram(g: np.ndarray, p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    """B_D g with <g, B_D g> = |g|_D^2 in the plain quadrature inner product."""
    sigma, svv = _sigma_mu(p, grid)
    dg = get_operator(grid).gradient(g)
    flux = np.einsum("ij...,j...->i...", sigma, dg)
    out = svv * g
    for d in range(3):
        out = out + _centered_T(flux[d], d, grid.spacing)
    return out


def bracket_v(grid: VelocityGrid) -> np.ndarray:
    return np.sqrt(1.0 + grid.speed2)


def lower_bound_terms(g: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """||<v>^-3/2 P_v grad g||^2 + ||<v>^-1/2 (I - P_v) grad g||^2 + ||<v>^-1/2 g||^2 per leading index."""
    from .projection import project_Pv

    jb = bracket_v(grid)
    dg = get_operator(grid).gradient(g)
    radial = project_Pv(dg, grid)
    tangential = dg - radial
    dens = np.sum(radial**2, axis=0) / jb**3 + np.sum(tangential**2, axis=0) / jb + g * g / jb
    return np.sum(dens, axis=VEL) * grid.weight


def fit_lower_bound(samples: np.ndarray, p: GlobalMaxwellianParams, grid: VelocityGrid) -> float:
    """Largest c with |g|_D^2 >= c (lower-bound terms) over the sample batch."""
    return float(np.min(d_norm_sq(samples, p, grid) / lower_bound_terms(samples, grid)))


# ---------------------------------------------------------------- weights


def X_weight(t: float, p: GlobalMaxwellianParams) -> float:
    return float(np.exp(1.0 / (8.0 * R_GAS * p.T_c * np.log(np.e + t))))


def Y_weight(t: float, p: GlobalMaxwellianParams) -> float:
    """-X'(t) / X(t)."""
    L = np.log(np.e + t)
    return float(1.0 / (8.0 * R_GAS * p.T_c * (np.e + t) * L * L))


def log_w(t: float, ell: float, i: int, p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    """log of <v>^(ell - i) exp((1 + |v|^2) / (8 R T_c ln(e + t)))."""
    return (ell - i) * 0.5 * np.log1p(grid.speed2) + (1.0 + grid.speed2) / (8.0 * R_GAS * p.T_c * np.log(np.e + t))


def x_derivatives(a: np.ndarray, sgrid: SpatialGrid, order: int) -> list[np.ndarray]:
    """All partials d^alpha a with |alpha| = order (as an ordered multi-index list)."""
    out = []
    for combo in itertools.product(range(sgrid.dim_x), repeat=order):
        b = a
        for ax in combo:
            b = spectral_derivative(b, sgrid, axis=ax)
        out.append(b)
    return out


def _l2_sq(a: np.ndarray, sgrid: SpatialGrid, vgrid: VelocityGrid | None = None) -> float:
    w = sgrid.cell_volume * (vgrid.weight if vgrid is not None else 1.0)
    return float(np.sum(a * a) * w)


def sobolev_sq(a: np.ndarray, sgrid: SpatialGrid, vgrid: VelocityGrid | None, i: int) -> float:
    """||grad_x^i a||^2 over x (and v when ``vgrid`` is given)."""
    return sum(_l2_sq(b, sgrid, vgrid) for b in x_derivatives(a, sgrid, i))


def sobolev_d_sq(a: np.ndarray, sgrid: SpatialGrid, vgrid: VelocityGrid, p: GlobalMaxwellianParams, i: int) -> float:
    return sum(float(np.sum(d_norm_sq(b, p, vgrid)) * sgrid.cell_volume) for b in x_derivatives(a, sgrid, i))


@dataclass(frozen=True)
class WeightedNorms:
    values: tuple[float, ...]  # ||w_i grad^i h||, i = 0..s
    d_values: tuple[float, ...]  # ||w_i grad^i h||_D
    X: float
    Y: float
    finite: bool


def weighted_norms(
    h: np.ndarray, t: float, ell: float, p: GlobalMaxwellianParams, sgrid: SpatialGrid, vgrid: VelocityGrid, s: int = 2
) -> WeightedNorms:
    vals, dvals = [], []
    for i in range(s + 1):
        lw = log_w(t, ell, i, p, vgrid)
        tot = dtot = 0.0
        for b in x_derivatives(h, sgrid, i):
            # |w b|^2 = exp(2 log w + log b^2), summed without forming w alone
            with np.errstate(divide="ignore", over="ignore"):
                tot += float(np.sum(np.exp(2.0 * lw + np.log(b * b))) * sgrid.cell_volume * vgrid.weight)
                wb = np.sign(b) * np.exp(lw + np.log(np.abs(b)))
            dtot += float(np.sum(d_norm_sq(wb, p, vgrid)) * sgrid.cell_volume)
        vals.append(np.sqrt(tot))
        dvals.append(np.sqrt(dtot))
    finite = bool(np.all(np.isfinite(vals)) and np.all(np.isfinite(dvals)))
    return WeightedNorms(tuple(vals), tuple(dvals), X_weight(t, p), Y_weight(t, p), finite)


# ---------------------------------------------------------------- energies


@dataclass(frozen=True)
class EnergyRow:
    time: float
    eps: float
    energy: float
    dissipation: float
    finite: bool = True


def energy_functionals(state, es, p: GlobalMaxwellianParams, ell: float = 3.0) -> EnergyRow:
    """(E, D) for a remainder state; ``es.branch`` selects the Landau or VML form."""
    eps, sg, vg = state.eps, es.sgrid, es.vgrid
    snap = es.snapshots[state.index]
    f, h = state.f, state.h
    f_micro = complement_PM(f, snap.basis)
    h_micro = complement_PM(h, build_global_basis(p, vg))
    E = D = 0.0
    finite = True
    if es.branch == "landau":
        for i in range(3):
            E += eps**i * (sobolev_sq(f, sg, vg, i) + eps * sobolev_sq(h, sg, vg, i))
            D += eps ** (i - 1) * (sobolev_d_sq(f_micro, sg, vg, p, i) + eps * sobolev_d_sq(h_micro, sg, vg, p, i))
        return EnergyRow(state.time, eps, E, D, finite)
    wn = weighted_norms(h, state.time, ell, p, sg, vg)
    finite = wn.finite
    weight = np.sqrt(4.0 * np.pi * R_GAS * snap.moments.T)[..., None, None, None]
    Y = wn.Y
    jb = 1.0 + np.sqrt(vg.speed2)
    for i in range(3):
        lw = log_w(state.time, ell, i, p, vg)
        yterm = sum(_l2_sq(jb * np.exp(lw) * b, sg, vg) for b in x_derivatives(h, sg, i))
        E += eps**i * (
            sobolev_sq(weight * f, sg, vg, i)
            + sobolev_sq(state.E_R, sg, None, i)
            + sobolev_sq(state.B_R, sg, None, i)
            + eps ** (4.0 / 3.0) * wn.values[i] ** 2
        )
        D += eps**i * (
            sobolev_d_sq(f_micro, sg, vg, p, i) / eps + eps ** (1.0 / 3.0) * wn.d_values[i] ** 2 + eps ** (4.0 / 3.0) * Y * yterm
        )
    return EnergyRow(state.time, eps, E, D, finite)


def convergence_metric(F: np.ndarray, m: FluidMoments, sgrid: SpatialGrid, vgrid: VelocityGrid, order: int = 2) -> float:
    """||M^-1/2 (F - M)||_{H^2} with spectral x-derivatives."""
    logM = log_local_maxwellian(m, vgrid)
    g = (F - np.exp(logM)) * np.exp(-0.5 * logM)
    return float(np.sqrt(sum(sobolev_sq(g, sgrid, vgrid, i) for i in range(order + 1))))


# ---------------------------------------------------------------- spectral gap


@dataclass(frozen=True)
class SpectralGap:
    eigenvalues: np.ndarray  # smallest generalized eigenvalues of (L, B_D)
    delta: float  # the sixth one
    n_null: int  # eigenvalues below 1e-4 delta
    null_angle: float  # largest principal angle between the near-null modes and span{chi_j}
    iterations: int


def spectral_gap(
    p: GlobalMaxwellianParams,
    grid: VelocityGrid,
    n_eig: int = 8,
    tol: float = 1e-7,
    maxiter: int = 2000,
    seed: int = 0,
    null_ratio: float = 1e-4,
) -> SpectralGap:
    """Smallest eigenvalues of L x = lambda B_D x by LOBPCG, without deflation."""
    L = LinearizedOperator.global_(p, grid)
    N = grid.n_v**3
    shape = grid.shape

    def mat(fn):
        def mm(X):
            X = np.asarray(X)
            vec = X.ndim == 1
            Xb = X.reshape(N, -1).T.reshape((-1,) + shape)
            Y = fn(Xb).reshape(-1, N).T
            return Y[:, 0] if vec else Y

        return LinearOperator((N, N), matvec=mm, matmat=mm, dtype=float)

    A = mat(L)
    B = mat(lambda X: dissipation_gram(X, p, grid))
    rng = np.random.default_rng(seed)
    sqrt_mu = np.exp(0.5 * np.log(global_maxwellian(p, grid))).ravel()
    X0 = rng.standard_normal((N, n_eig)) * sqrt_mu[:, None] + 1e-3 * rng.standard_normal((N, n_eig))
    lam, vecs, hist = lobpcg(A, X0, B=B, largest=False, tol=tol, maxiter=maxiter, retLambdaHistory=True)
    order = np.argsort(lam)
    lam, vecs = lam[order], vecs[:, order]
    delta = float(lam[5])
    n_null = int(np.sum(lam < null_ratio * delta))
    chi = build_global_basis(p, grid).chi.reshape(5, N).T
    k = max(n_null, 1)
    angle = float(np.max(subspace_angles(vecs[:, :k], chi))) if n_null == 5 else float("nan")
    return SpectralGap(lam, delta, n_null, angle, len(hist))
