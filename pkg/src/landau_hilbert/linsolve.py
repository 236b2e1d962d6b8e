"""Batched conjugate gradients for the per-cell linearized collision systems.

Every spatial cell carries an independent symmetric positive (semi)definite
system in velocity space. The iteration runs all cells in lock step with
per-cell step sizes, so one operator application serves the whole batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .collision import LinearizedOperator
from .grid import VelocityGrid
from .maxwellian import FluidMoments, log_local_maxwellian

Array = np.ndarray


class ConvergenceError(RuntimeError):
    """CG failed to reach the requested tolerance."""


@dataclass(frozen=True)
class CGInfo:
    iterations: int
    residual: np.ndarray  # per-cell relative residual
    ritz_min: float  # smallest Ritz value seen, a spectral-gap estimate
    ritz_max: float


def _dot(a: Array, b: Array) -> Array:
    return np.sum(a * b, axis=(-3, -2, -1))


def _col(a: Array) -> Array:
    return a[..., None, None, None]


def batched_cg(
    apply: Callable[[Array], Array],
    b: Array,
    tol: float = 1e-11,
    maxiter: int = 2000,
    precond: Callable[[Array], Array] | None = None,
    project: Callable[[Array], Array] | None = None,
    x0: Array | None = None,
) -> tuple[Array, CGInfo]:
    """Solve A x = b cell by cell; ``project`` is re-applied to every Krylov vector."""
    P = project if project is not None else (lambda z: z)
    M = precond if precond is not None else (lambda z: z)
    b = P(b)
    bnorm = np.sqrt(_dot(b, b))
    # Cells whose right-hand side is round-off relative to the batch solve to zero.
    negligible = bnorm <= 1e-13 * np.max(bnorm, initial=0.0)
    b = np.where(_col(negligible), 0.0, b)
    bnorm = np.where(negligible, 0.0, bnorm)
    scale = np.where(bnorm > 0, bnorm, 1.0)
    x = np.zeros_like(b) if x0 is None else P(x0)
    r = b - P(apply(x)) if x0 is not None else b.copy()
    z = P(M(r))
    p = z.copy()
    rz = _dot(r, z)
    alphas, betas = [], []
    res = np.sqrt(_dot(r, r)) / scale
    it = 0
    while it < maxiter and np.any(res > tol):
        Ap = P(apply(p))
        pAp = _dot(p, Ap)
        active = (res > tol) & (pAp > 0)
        alpha = np.where(active, rz / np.where(pAp > 0, pAp, 1.0), 0.0)
        x = x + _col(alpha) * p
        r = r - _col(alpha) * Ap
        z = P(M(r))
        rz_new = _dot(r, z)
        beta = np.where(active, rz_new / np.where(rz != 0, rz, 1.0), 0.0)
        p = z + _col(beta) * p
        rz = rz_new
        res = np.where(active, np.sqrt(_dot(r, r)) / scale, res)
        alphas.append(np.atleast_1d(alpha).ravel())
        betas.append(np.atleast_1d(beta).ravel())
        it += 1
    lo, hi = _ritz_bounds(alphas, betas)
    return x, CGInfo(it, res, lo, hi)


def _ritz_bounds(alphas: list, betas: list) -> tuple[float, float]:
    if not alphas:
        return float("nan"), float("nan")
    a = np.array(alphas)
    bt = np.array(betas)
    lo, hi = np.inf, 0.0
    for c in range(a.shape[1]):
        keep = a[:, c] > 0
        ac, bc = a[keep, c], bt[keep, c]
        if ac.size == 0:
            continue
        diag = 1.0 / ac
        diag[1:] += bc[:-1] / ac[:-1]
        off = np.sqrt(np.maximum(bc[:-1], 0.0)) / ac[:-1]
        T = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        ev = np.linalg.eigvalsh(T)
        lo, hi = min(lo, float(ev[0])), max(hi, float(ev[-1]))
    return lo, hi


class ReferencePreconditioner:
    """Dense spectral inverse of L about the reference Maxwellian (1, 0, T_ref).

    L_M is linear in rho, so (1 / rho) L_ref^+ approximates L_M^+ for nearly
    uniform backgrounds; the shifted form (1 + tau rho L_ref)^-1 serves the
    implicit collision steps. Meant for small grids (n_v^3 <= 4096).
    """

    def __init__(self, grid: VelocityGrid, T_ref: float):
        self.grid = grid
        self.T_ref = float(T_ref)
        m = FluidMoments(np.array(1.0), np.zeros(3), np.array(self.T_ref))
        op = LinearizedOperator(grid, log_local_maxwellian(m, grid))
        N = grid.n_v**3
        A = np.empty((N, N))
        batch = 128
        eye = np.eye(N)
        for start in range(0, N, batch):
            blk = eye[start : start + batch].reshape((-1,) + grid.shape)
            A[:, start : start + batch] = op(blk).reshape(-1, N).T
        lam, V = np.linalg.eigh(0.5 * (A + A.T))
        self.eigenvalues = lam
        self.vectors = V
        self._cut = 1e-8 * lam[-1]

    def _apply(self, r: Array, scale: Array) -> Array:
        N = self.grid.n_v**3
        flat = r.reshape(-1, N)
        z = flat @ self.vectors
        z = z * scale.reshape(-1, N) if scale.ndim > 1 else z * scale
        return (z @ self.vectors.T).reshape(r.shape)

    def pinv(self, r: Array, rho: Array) -> Array:
        lam = self.eigenvalues
        inv = np.where(lam > self._cut, 1.0 / np.where(lam > self._cut, lam, 1.0), 0.0)
        rho = np.reshape(np.asarray(rho, dtype=float), (-1, 1))
        return self._apply(r, inv[None, :] / rho)

    def shifted(self, r: Array, rho: Array, tau: float) -> Array:
        rho = np.reshape(np.asarray(rho, dtype=float), (-1, 1))
        return self._apply(r, 1.0 / (1.0 + tau * rho * np.maximum(self.eigenvalues, 0.0)[None, :]))


@lru_cache(maxsize=4)
def reference_preconditioner(grid: VelocityGrid, T_ref: float) -> ReferencePreconditioner:
    return ReferencePreconditioner(grid, T_ref)


def auto_preconditioner(grid: VelocityGrid, T: Array, policy: str = "auto") -> ReferencePreconditioner | None:
    """Reference preconditioner for small grids under ``auto``; ``none`` or ``reference`` force the choice."""
    if policy == "none" or (policy == "auto" and grid.n_v**3 > 4096):
        return None
    if policy not in ("auto", "reference"):
        raise ValueError(f"unknown preconditioner policy {policy!r}")
    return reference_preconditioner(grid, round(float(np.mean(T)), 2))
