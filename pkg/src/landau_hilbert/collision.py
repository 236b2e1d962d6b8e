"""Coulomb kernel, Landau collision operator and its linearizations.

Two discretizations of

    C(G, H) = d_i [ sigma_G^{ij} d_j H - H (phi^{ij} * d_j G) ],   sigma_G = phi * G,

are provided.

``collide`` is the direct form: centered differences (one-sided at the cube
faces) and convolutions over all grid pairs with the self pair dropped. Because
phi is even and ``phi(w) w = 0`` holds node by node, C(F, F) conserves mass,
momentum and energy up to a Gaussian-small boundary flux.

``collide_weighted`` is a flux form built around a positive weight W:

    C_W(G, H) = 1/2 sum_{s=+-} Div^s [ sigma_G W delta^s(H / W) - H phi * (W delta^s(G / W)) ]

with one-sided differences ``delta^s`` and ``Div^s = -(delta^s)^T``. It is
consistent to second order, vanishes identically at G = H = W, and makes the
linearization about W exactly symmetric and nonnegative with the five collision
invariants as its null space (up to terms of size W on the cube faces). The
average over both one-sided stencils removes the checkerboard null modes a
single centered weighted stencil would create. The linearized operators and the
kinetic solvers use this form; the direct form stays available as a
cross-check route.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .grid import VEL_AXES, VelocityGrid, integrate_v
from .maxwellian import (
    R_GAS,
    FluidMoments,
    GlobalMaxwellianParams,
    log_global_maxwellian,
    log_local_maxwellian,
)

COULOMB_GAMMA = -3.0
# Upper-triangular component order of a symmetric 3x3 tensor.
_SYM = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
_SYM_INDEX = np.array([[0, 1, 2], [1, 3, 4], [2, 4, 5]])


class SingularKernelError(ValueError):
    """Raised when the kernel is evaluated at the origin."""


def phi_kernel(v, gamma: float = COULOMB_GAMMA) -> np.ndarray:
    """(delta_ij - v_i v_j / |v|^2) |v|^(gamma + 2) for a single velocity vector."""
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    r2 = float(v @ v)
    if r2 == 0.0:
        raise SingularKernelError("phi is singular at v = 0")
    return (np.eye(3) - np.outer(v, v) / r2) * r2 ** ((gamma + 2.0) / 2.0)


def _axis(d: int) -> int:
    return VEL_AXES[d]


def _take(a: np.ndarray, d: int, sl: slice) -> tuple:
    idx = [slice(None)] * a.ndim
    idx[a.ndim + _axis(d)] = sl
    return tuple(idx)


def _centered(H: np.ndarray, d: int, h: float) -> np.ndarray:
    return np.gradient(H, h, axis=_axis(d), edge_order=1)


class LandauOperator:
    """Kernel tables and collision evaluations for one velocity grid.

    Tables hold the real transform of each of the six kernel components over
    the zero-padded difference cube, scaled by the quadrature weight.
    """

    def __init__(self, grid: VelocityGrid, gamma: float = COULOMB_GAMMA):
        self.grid = grid
        self.gamma = float(gamma)
        n = grid.n_v
        self._pad = (2 * n,) * 3
        offs = np.arange(2 * n)
        offs = np.where(offs < n, offs, offs - 2 * n) * grid.spacing
        offs[n] = 0.0  # offset +-n never occurs between two grid nodes
        dx, dy, dz = np.meshgrid(offs, offs, offs, indexing="ij")
        d = np.stack([dx, dy, dz])
        r2 = np.sum(d**2, axis=0)
        live = r2 > 0
        safe = np.where(live, r2, 1.0)
        scale = np.where(live, safe ** ((self.gamma + 2.0) / 2.0), 0.0) * grid.weight
        tables = []
        for i, j in _SYM:
            comp = ((1.0 if i == j else 0.0) - d[i] * d[j] / safe) * scale
            # The padded kernel is even, so its transform is real.
            tables.append(sfft.rfftn(comp, axes=VEL_AXES).real)
        self._khat = np.stack(tables)

    def _fwd(self, g: np.ndarray) -> np.ndarray:
        return sfft.rfftn(g, s=self._pad, axes=VEL_AXES)

    def _inv(self, ghat: np.ndarray) -> np.ndarray:
        n = self.grid.n_v
        return sfft.irfftn(ghat, s=self._pad, axes=VEL_AXES)[..., :n, :n, :n]

    def sigma_conv(self, g: np.ndarray) -> np.ndarray:
        """sigma_g^{ij}(v) = sum_{v' != v} phi^{ij}(v - v') g(v') h^3, shape (3, 3) + g.shape."""
        g = np.asarray(g, dtype=float)
        ghat = self._fwd(g)
        comps = [self._inv(self._khat[c] * ghat) for c in range(6)]
        return np.stack([np.stack([comps[_SYM_INDEX[i, j]] for j in range(3)]) for i in range(3)])

    def conv_vector(self, Y: np.ndarray) -> np.ndarray:
        """(phi * Y)_i = sum_j phi^{ij} * Y_j for Y of shape (3,) + field shape."""
        Yhat = [self._fwd(Y[j]) for j in range(3)]
        out = []
        for i in range(3):
            acc = self._khat[_SYM_INDEX[i, 0]] * Yhat[0]
            acc = acc + self._khat[_SYM_INDEX[i, 1]] * Yhat[1]
            acc = acc + self._khat[_SYM_INDEX[i, 2]] * Yhat[2]
            out.append(self._inv(acc))
        return np.stack(out)

    def gradient(self, H: np.ndarray) -> np.ndarray:
        h = self.grid.spacing
        return np.stack([_centered(H, d, h) for d in range(3)])

    def divergence(self, Z: np.ndarray) -> np.ndarray:
        h = self.grid.spacing
        return sum(_centered(Z[d], d, h) for d in range(3))

    def collide(self, G: np.ndarray, H: np.ndarray) -> np.ndarray:
        """Direct centered-difference evaluation of C(G, H)."""
        sigma = self.sigma_conv(G)
        b = self.conv_vector(self.gradient(G))
        dH = self.gradient(H)
        flux = np.einsum("ij...,j...->i...", sigma, dH) - H * b
        return self.divergence(flux)

    def frame(self, logW: np.ndarray) -> "WeightedFrame":
        return WeightedFrame(self.grid, np.asarray(logW, dtype=float))

    def collide_weighted(
        self,
        G: np.ndarray,
        H: np.ndarray,
        frame: "WeightedFrame",
        sigma_G: np.ndarray | None = None,
    ) -> np.ndarray:
        """Flux-form C_W(G, H) for the weight carried by ``frame``."""
        if sigma_G is None:
            sigma_G = self.sigma_conv(G)
        out = np.zeros(np.broadcast_shapes(np.shape(G), np.shape(H)))
        for s in (1, -1):
            gH = frame.grad(H, s)
            bG = self.conv_vector(frame.grad(G, s))
            flux = np.einsum("ij...,j...->i...", sigma_G, gH) - H * bG
            out += frame.div(flux, s)
        return 0.5 * out


@dataclass(frozen=True, eq=False)
class WeightedFrame:
    """Weighted one-sided differences W delta^s(. / W) and their adjoint divergences."""

    grid: VelocityGrid
    logW: np.ndarray
    _ratio: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ratio = {}
        for d in range(3):
            lo = self.logW[_take(self.logW, d, slice(None, -1))]
            hi = self.logW[_take(self.logW, d, slice(1, None))]
            ratio[(d, 1)] = np.exp(lo - hi)  # W(x) / W(x + e), x < n - 1
            ratio[(d, -1)] = np.exp(hi - lo)  # W(x) / W(x - e), x >= 1
        object.__setattr__(self, "_ratio", ratio)

    @property
    def weight(self) -> np.ndarray:
        return np.exp(self.logW)

    def grad(self, H: np.ndarray, s: int) -> np.ndarray:
        h = self.grid.spacing
        H = np.broadcast_to(H, np.broadcast_shapes(np.shape(H), self.logW.shape))
        out = np.zeros((3,) + H.shape)
        for d in range(3):
            lo = _take(H, d, slice(None, -1))
            hi = _take(H, d, slice(1, None))
            r = self._ratio[(d, s)]
            if s == 1:
                out[d][lo] = (H[hi] * r - H[lo]) / h
            else:
                out[d][hi] = (H[hi] - H[lo] * r) / h
        return out

    def div(self, Z: np.ndarray, s: int) -> np.ndarray:
        h = self.grid.spacing
        out = np.zeros(Z.shape[1:])
        for d in range(3):
            lo = _take(out, d, slice(None, -1))
            hi = _take(out, d, slice(1, None))
            if s == 1:
                out[lo] += Z[d][lo]
                out[hi] -= Z[d][lo]
            else:
                out[hi] -= Z[d][hi]
                out[lo] += Z[d][hi]
        return out / h


@lru_cache(maxsize=8)
def get_operator(grid: VelocityGrid, gamma: float = COULOMB_GAMMA) -> LandauOperator:
    return LandauOperator(grid, gamma)


def sigma_conv(g: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    return get_operator(grid).sigma_conv(g)


def collide(G: np.ndarray, H: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    return get_operator(grid).collide(G, H)


def collide_weighted(G: np.ndarray, H: np.ndarray, logW: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    op = get_operator(grid)
    return op.collide_weighted(G, H, op.frame(logW))


def _expand(a, extra: int = 3) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.reshape(a, a.shape + (1,) * extra)


def _relative_velocity(m: FluidMoments, grid: VelocityGrid) -> np.ndarray:
    return np.stack([grid.mesh[i] - _expand(m.u[..., i]) for i in range(3)])


def _global_moments(p: GlobalMaxwellianParams) -> FluidMoments:
    return FluidMoments(np.array(1.0), np.zeros(3), np.array(p.T_c))


class LinearizedOperator:
    """L_W f = -W^{-1/2} [C_W(W, W^{1/2} f) + C_W(W^{1/2} f, W)] with cached sigma_W.

    Split into the diffusion part A (from sigma_W) and the convolution part K,
    both in flux form. Symmetric and nonnegative in the plain quadrature inner
    product.
    """

    def __init__(self, grid: VelocityGrid, logW: np.ndarray, gamma: float = COULOMB_GAMMA):
        self.op = get_operator(grid, gamma)
        self.grid = grid
        self.frame = self.op.frame(logW)
        self.W = np.exp(self.frame.logW)
        self.sqrtW = np.exp(0.5 * self.frame.logW)
        self.sigma = self.op.sigma_conv(self.W)

    @classmethod
    def local(cls, m: FluidMoments, grid: VelocityGrid) -> "LinearizedOperator":
        return cls(grid, log_local_maxwellian(m, grid))

    @classmethod
    def global_(cls, p: GlobalMaxwellianParams, grid: VelocityGrid) -> "LinearizedOperator":
        return cls(grid, log_global_maxwellian(p, grid))

    def split(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(A f, K f) with -L f = A f + K f."""
        g = self.sqrtW * f
        A = np.zeros(np.broadcast_shapes(g.shape, self.W.shape))
        K = np.zeros_like(A)
        for s in (1, -1):
            dg = self.frame.grad(g, s)
            A += self.frame.div(np.einsum("ij...,j...->i...", self.sigma, dg), s)
            K -= self.frame.div(self.W * self.op.conv_vector(dg), s)
        return 0.5 * A / self.sqrtW, 0.5 * K / self.sqrtW

    def __call__(self, f: np.ndarray) -> np.ndarray:
        A, K = self.split(f)
        return -(A + K)

    def gamma(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        """W^{-1/2} C_W(W^{1/2} f1, W^{1/2} f2)."""
        g1 = self.sqrtW * f1
        return self.op.collide_weighted(g1, self.sqrtW * f2, self.frame) / self.sqrtW


def _expanded_LM(f: np.ndarray, m: FluidMoments, grid: VelocityGrid) -> np.ndarray:
    """-L_M f = A_M f + K_M f from the expanded closed forms, centered differences."""
    op = get_operator(grid)
    h = grid.spacing
    M = np.exp(log_local_maxwellian(m, grid))
    sqrtM = np.sqrt(M)
    w = _relative_velocity(m, grid) / (2.0 * R_GAS * _expand(m.T))  # (v - u) / (2 R T)
    sigma = op.sigma_conv(M)
    df = op.gradient(f)
    A = op.divergence(np.einsum("ij...,j...->i...", sigma, df))
    A = A - np.einsum("ij...,i...,j...->...", sigma, w, w) * f
    A = A + sum(_centered(np.einsum("j...,j...->...", sigma[i], w), i, h) for i in range(3)) * f
    K = -op.divergence(M * op.conv_vector(sqrtM * (df + w * f))) / sqrtM
    return A + K


def linearized_LM(f: np.ndarray, m: FluidMoments, grid: VelocityGrid, route: str = "explicit") -> np.ndarray:
    """L_M f.

    Routes: ``explicit`` (flux-form A_M + K_M, the default), ``expanded`` (expanded
    closed forms with centered differences), ``direct`` (defining expression
    through ``collide``).
    """
    if route == "explicit":
        return LinearizedOperator.local(m, grid)(f)
    if route == "expanded":
        return -_expanded_LM(f, m, grid)
    if route == "direct":
        op = get_operator(grid)
        M = np.exp(log_local_maxwellian(m, grid))
        sqrtM = np.sqrt(M)
        g = sqrtM * f
        return -(op.collide(M, g) + op.collide(g, M)) / sqrtM
    raise ValueError(f"unknown route {route!r}")


def linearized_L(h: np.ndarray, p: GlobalMaxwellianParams, grid: VelocityGrid, route: str = "explicit") -> np.ndarray:
    """L h, the linearization about the global Maxwellian mu."""
    return linearized_LM(h, _global_moments(p), grid, route)


def _expanded_Ld(h: np.ndarray, m: FluidMoments, p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    op = get_operator(grid)
    hs = grid.spacing
    v = grid.mesh
    M = np.exp(log_local_maxwellian(m, grid))
    mu = np.exp(log_global_maxwellian(p, grid))
    sqrt_mu = np.sqrt(mu)
    T = _expand(m.T)
    Tc = p.T_c
    RT, RTc = R_GAS * T, R_GAS * Tc
    u = np.stack([_expand(m.u[..., i]) for i in range(3)])
    c = -u / RT + (Tc - T) / (RTc * T) * v
    sM = op.sigma_conv(M)
    sD = op.sigma_conv(M - mu)
    dh = op.gradient(h)
    half = v / (2.0 * RTc)
    A = op.divergence(np.einsum("ij...,j...->i...", sM, c) * h)
    A = A - np.einsum("ij...,i...,j...->...", sM, half, c) * h
    A = A + op.divergence(np.einsum("ij...,j...->i...", sD, dh))
    A = A - np.einsum("ij...,i...,j...->...", sD, half, half) * h
    A = A + sum(_centered(np.einsum("j...,j...->...", sD[i], half), i, hs) for i in range(3)) * h
    coef = u / RT * M + ((T - Tc) * mu - Tc * (M - mu)) / (RTc * T) * v
    K1 = op.divergence(np.einsum("ij...,j...->i...", op.sigma_conv(sqrt_mu * h), coef))
    K2 = op.divergence((M - mu) * op.conv_vector(sqrt_mu * (dh - half * h)))
    return A + (K1 - K2) / sqrt_mu


def difference_Ld(
    h: np.ndarray, m: FluidMoments, p: GlobalMaxwellianParams, grid: VelocityGrid, route: str = "expanded"
) -> np.ndarray:
    """L_d h = -mu^{-1/2} [C(M - mu, mu^{1/2} h) + C(mu^{1/2} h, M - mu)].

    Routes: ``expanded`` (expanded closed forms A_d + K_d, the default), ``direct``
    (``collide`` with both Maxwellians), ``gamma`` (flux-form Gamma about mu).
    """
    if route == "expanded":
        return -_expanded_Ld(h, m, p, grid)
    op = get_operator(grid)
    logmu = log_global_maxwellian(p, grid)
    mu = np.exp(logmu)
    sqrt_mu = np.exp(0.5 * logmu)
    D = np.exp(log_local_maxwellian(m, grid)) - mu
    g = sqrt_mu * h
    if route == "direct":
        return -(op.collide(D, g) + op.collide(g, D)) / sqrt_mu
    if route == "gamma":
        fr = op.frame(np.broadcast_to(logmu, D.shape))
        return -(op.collide_weighted(D, g, fr) + op.collide_weighted(g, D, fr)) / sqrt_mu
    raise ValueError(f"unknown route {route!r}")


def _expanded_gamma(f1: np.ndarray, f2: np.ndarray, m: FluidMoments, grid: VelocityGrid) -> np.ndarray:
    op = get_operator(grid)
    sqrtM = np.exp(0.5 * log_local_maxwellian(m, grid))
    w = _relative_velocity(m, grid) / (2.0 * R_GAS * _expand(m.T))
    g1 = sqrtM * f1
    sig = op.sigma_conv(g1)
    b = op.conv_vector(sqrtM * op.gradient(f1))
    df2 = op.gradient(f2)
    Z = np.einsum("ij...,j...->i...", sig, df2) - b * f2
    # w_i sigma_g^{ij} = phi^{ij} * (w'_i g) holds node by node, so the weighted terms reduce to w . Z.
    return op.divergence(Z) - np.einsum("i...,i...->...", w, Z)


def gamma_M(
    f1: np.ndarray, f2: np.ndarray, m: FluidMoments, grid: VelocityGrid, route: str = "explicit"
) -> np.ndarray:
    """Gamma_M(f1, f2) = M^{-1/2} C(M^{1/2} f1, M^{1/2} f2)."""
    if route == "explicit":
        return LinearizedOperator.local(m, grid).gamma(f1, f2)
    if route == "expanded":
        return _expanded_gamma(f1, f2, m, grid)
    if route == "direct":
        sqrtM = np.exp(0.5 * log_local_maxwellian(m, grid))
        return collide(sqrtM * f1, sqrtM * f2, grid) / sqrtM
    raise ValueError(f"unknown route {route!r}")


def gamma(h1: np.ndarray, h2: np.ndarray, p: GlobalMaxwellianParams, grid: VelocityGrid, route: str = "explicit") -> np.ndarray:
    return gamma_M(h1, h2, _global_moments(p), grid, route)


def conservative_correction(Q: np.ndarray, grid: VelocityGrid, weight: np.ndarray | None = None) -> np.ndarray:
    """Remove the mass, momentum and energy content of Q along weight * span{1, v, |v|^2}.

    Off by default in every solver; ``weight`` defaults to the unit Maxwellian.
    """
    v = grid.mesh
    if weight is None:
        weight = np.exp(-0.5 * grid.speed2)
    psi = np.stack([np.ones(grid.shape), v[0], v[1], v[2], grid.speed2])
    basis = weight * psi
    gram = np.einsum("a...,b...->ab", psi, basis) * grid.weight
    lead = Q.shape[: Q.ndim - 3]
    rhs = np.stack([integrate_v(Q * psi[a], grid) for a in range(5)], axis=-1)
    coef = np.linalg.solve(gram, np.reshape(rhs, (-1, 5)).T).T.reshape(lead + (5,))
    return Q - np.tensordot(coef, basis, axes=([-1], [0]))
