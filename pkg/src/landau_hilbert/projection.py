"""Null-space bases of the linearized operators and the projections onto them.

For moments (rho, u, T) the continuum basis of N_M is

    chi_0 = M^{1/2} / sqrt(rho)
    chi_i = (v_i - u_i) M^{1/2} / sqrt(R rho T)               i = 1, 2, 3
    chi_4 = (|v - u|^2 / (R T) - 3) M^{1/2} / sqrt(6 rho)

which is orthonormal in L^2(dv). Under midpoint quadrature it is only nearly
so; a two-pass modified Gram-Schmidt makes the discrete basis exactly
orthonormal. Bases carry the velocity axes last and the five basis functions
on the axis just before them: shape ``m.shape + (5,) + grid.shape``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import VelocityGrid
from .maxwellian import R_GAS, FluidMoments, GlobalMaxwellianParams, log_local_maxwellian


def _inner(a: np.ndarray, b: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    return np.sum(a * b, axis=(-3, -2, -1)) * grid.weight


@dataclass(frozen=True, eq=False)
class MacroBasis:
    """Raw continuum basis ``raw`` and its discretely orthonormalized version ``chi``."""

    grid: VelocityGrid
    moments: FluidMoments
    raw: np.ndarray
    chi: np.ndarray

    @property
    def sqrtM(self) -> np.ndarray:
        return self.raw[..., 0, :, :, :] * np.sqrt(self.moments.rho)[..., None, None, None]

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """<f, chi_j> per cell, shape m.shape + (5,)."""
        return _inner(f[..., None, :, :, :], self.chi, self.grid)

    def raw_gram(self) -> np.ndarray:
        return np.einsum("...avwz,...bvwz->...ab", self.raw, self.raw) * self.grid.weight


def raw_basis(m: FluidMoments, grid: VelocityGrid) -> np.ndarray:
    sqrtM = np.exp(0.5 * log_local_maxwellian(m, grid))
    ex = (Ellipsis,) + (None,) * 3
    rho, T = m.rho[ex], m.T[ex]
    w = [grid.mesh[i] - m.u[..., i][ex] for i in range(3)]
    w2 = w[0] ** 2 + w[1] ** 2 + w[2] ** 2
    chis = [sqrtM / np.sqrt(rho)]
    chis += [w[i] * sqrtM / np.sqrt(R_GAS * rho * T) for i in range(3)]
    chis.append((w2 / (R_GAS * T) - 3.0) * sqrtM / np.sqrt(6.0 * rho))
    return np.stack(chis, axis=-4)


def _gram_schmidt(raw: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    chi = np.array(raw, copy=True)
    for _ in range(2):
        for j in range(5):
            cj = chi[..., j, :, :, :]
            for i in range(j):
                ci = chi[..., i, :, :, :]
                cj = cj - _inner(cj, ci, grid)[..., None, None, None] * ci
            cj = cj / np.sqrt(_inner(cj, cj, grid))[..., None, None, None]
            chi[..., j, :, :, :] = cj
    return chi


def build_local_basis(m: FluidMoments, grid: VelocityGrid) -> MacroBasis:
    raw = raw_basis(m, grid)
    return MacroBasis(grid, m, raw, _gram_schmidt(raw, grid))


@lru_cache(maxsize=8)
def build_global_basis(p: GlobalMaxwellianParams, grid: VelocityGrid) -> MacroBasis:
    m = FluidMoments(np.array(1.0), np.zeros(3), np.array(p.T_c))
    return build_local_basis(m, grid)


def project_PM(f: np.ndarray, basis: MacroBasis) -> np.ndarray:
    """Orthogonal projection onto N_M, cell by cell."""
    c = basis.coefficients(f)
    return np.sum(c[..., None, None, None] * basis.chi, axis=-4)


def complement_PM(f: np.ndarray, basis: MacroBasis) -> np.ndarray:
    return f - project_PM(f, basis)


def project_P(h: np.ndarray, p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    """Orthogonal projection onto N, the null space of L about mu."""
    return project_PM(h, build_global_basis(p, grid))


def hydro_fields(f_n: np.ndarray, basis: MacroBasis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rho_n, u_n, T_n) with P_M f_n = rho_n/sqrt(rho) chi_0 + u_n . chi/sqrt(R rho T) + T_n/sqrt(6 rho) chi_4."""
    rhs = _inner(f_n[..., None, :, :, :], basis.raw, basis.grid)
    b = np.linalg.solve(basis.raw_gram(), rhs[..., None])[..., 0]
    m = basis.moments
    rho_n = np.sqrt(m.rho) * b[..., 0]
    u_n = np.sqrt(R_GAS * m.rho * m.T)[..., None] * b[..., 1:4]
    T_n = np.sqrt(6.0 * m.rho) * b[..., 4]
    return rho_n, u_n, T_n


def macro_from_fields(rho_n, u_n, T_n, basis: MacroBasis) -> np.ndarray:
    """Inverse of ``hydro_fields``: the macroscopic field with the given hydrodynamic coefficients."""
    m = basis.moments
    b = np.concatenate(
        [
            (np.asarray(rho_n) / np.sqrt(m.rho))[..., None],
            np.asarray(u_n) / np.sqrt(R_GAS * m.rho * m.T)[..., None],
            (np.asarray(T_n) / np.sqrt(6.0 * m.rho))[..., None],
        ],
        axis=-1,
    )
    return np.sum(b[..., None, None, None] * basis.raw, axis=-4)


def project_Pv(g: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Radial projection (g . v) v / |v|^2 of a vector field with leading axis of length 3."""
    v = grid.mesh.reshape((3,) + (1,) * (g.ndim - 4) + grid.shape)
    radial = np.sum(g * v, axis=0) / grid.speed2
    return radial * v
