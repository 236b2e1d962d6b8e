"""Local and global Maxwellians, velocity moments and the f/h frame change.

    M_[rho,u,T](v) = rho (2 pi R T)^(-3/2) exp(-|v - u|^2 / (2 R T))
    mu(v)          = (2 pi R T_c)^(-3/2) exp(-|v|^2 / (2 R T_c))

with the gas constant R = 2/3. The remainder is carried in two frames,
sqrt(M) f = sqrt(mu) h, which requires T_c < min T so that M / mu decays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import VelocityGrid, integrate_v

R_GAS = 2.0 / 3.0
DEGENERATE_DENSITY = 1e-12


class DegenerateDensityError(ValueError):
    """Raised when a field has too little mass for u and T to be defined."""


@dataclass(frozen=True)
class FluidMoments:
    """Per-cell (rho, u, T); u carries a trailing axis of length 3."""

    rho: np.ndarray
    u: np.ndarray
    T: np.ndarray
    strict: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=float)
        u = np.asarray(self.u, dtype=float)
        T = np.asarray(self.T, dtype=float)
        if u.shape != rho.shape + (3,):
            u = np.broadcast_to(u, rho.shape + (3,)).copy()
        if T.shape != rho.shape:
            raise ValueError(f"T shape {T.shape} does not match rho shape {rho.shape}")
        if self.strict:
            if not np.all(rho > 0):
                raise ValueError("density must be positive")
            if not np.all(T > 0):
                raise ValueError("temperature must be positive")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "T", T)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.rho.shape

    def cell(self, index) -> "FluidMoments":
        return FluidMoments(self.rho[index], self.u[index], self.T[index], strict=self.strict)


@dataclass(frozen=True)
class GlobalMaxwellianParams:
    T_c: float = 1.0

    def __post_init__(self) -> None:
        if not self.T_c > 0:
            raise ValueError(f"T_c must be positive, got {self.T_c}")


def choose_T_c(T_min: float, margin: float = 0.05) -> GlobalMaxwellianParams:
    """Largest admissible reference temperature, (1 - margin) * min T."""
    if not 0 < margin < 1:
        raise ValueError("margin must lie in (0, 1)")
    return GlobalMaxwellianParams(T_c=(1.0 - margin) * float(T_min))


def _expand(a: np.ndarray, extra: int) -> np.ndarray:
    return np.reshape(a, np.shape(a) + (1,) * extra)


def log_local_maxwellian(m: FluidMoments, grid: VelocityGrid) -> np.ndarray:
    v = grid.mesh
    rho = _expand(m.rho, 3)
    T = _expand(m.T, 3)
    w2 = sum((v[i] - _expand(m.u[..., i], 3)) ** 2 for i in range(3))
    return np.log(rho) - 1.5 * np.log(2.0 * np.pi * R_GAS * T) - w2 / (2.0 * R_GAS * T)


def local_maxwellian(m: FluidMoments, grid: VelocityGrid) -> np.ndarray:
    """M(x, v) with shape m.shape + grid.shape; also accepts complex-perturbed moments."""
    v = grid.mesh
    rho = _expand(m.rho, 3)
    T = _expand(m.T, 3)
    w2 = sum((v[i] - _expand(m.u[..., i], 3)) ** 2 for i in range(3))
    return rho * (2.0 * np.pi * R_GAS * T) ** -1.5 * np.exp(-w2 / (2.0 * R_GAS * T))


def maxwellian_from_arrays(rho, u, T, grid: VelocityGrid) -> np.ndarray:
    """Unchecked evaluation; works with complex arguments (complex-step derivatives)."""
    v = grid.mesh
    rho = _expand(np.asarray(rho), 3)
    T = _expand(np.asarray(T), 3)
    u = np.asarray(u)
    w2 = sum((v[i] - _expand(u[..., i], 3)) ** 2 for i in range(3))
    return rho * (2.0 * np.pi * R_GAS * T) ** -1.5 * np.exp(-w2 / (2.0 * R_GAS * T))


def log_global_maxwellian(p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    return -1.5 * np.log(2.0 * np.pi * R_GAS * p.T_c) - grid.speed2 / (2.0 * R_GAS * p.T_c)


def global_maxwellian(p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    return np.exp(log_global_maxwellian(p, grid))


def raw_moments(F: np.ndarray, grid: VelocityGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rho, rho u, total energy density int |v|^2 F / 2) without any division."""
    v = grid.mesh
    rho = integrate_v(F, grid)
    mom = np.stack([integrate_v(F * v[i], grid) for i in range(3)], axis=-1)
    energy = 0.5 * integrate_v(F * grid.speed2, grid)
    return np.asarray(rho), np.asarray(mom), np.asarray(energy)


def moments_of(F: np.ndarray, grid: VelocityGrid) -> FluidMoments:
    """Formal moments rho, u, T of a (possibly signed) field."""
    rho, mom, _ = raw_moments(F, grid)
    if np.any(rho <= DEGENERATE_DENSITY):
        raise DegenerateDensityError(f"density {np.min(rho):.3e} <= {DEGENERATE_DENSITY}")
    u = mom / rho[..., None]
    v = grid.mesh
    w2 = sum((v[i] - _expand(u[..., i], 3)) ** 2 for i in range(3))
    T = integrate_v(F * w2, grid) / (3.0 * R_GAS * rho)
    return FluidMoments(rho, u, np.asarray(T), strict=False)


def _check_frames(m: FluidMoments, p: GlobalMaxwellianParams) -> None:
    # Equality is admitted: M / mu then grows at most exponentially, never super-Gaussianly.
    if p.T_c > float(np.min(m.T)):
        raise ValueError(f"T_c = {p.T_c} must not exceed min T = {float(np.min(m.T))}")


def frame_ratio(m: FluidMoments, p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    """sqrt(M / mu), evaluated in log space."""
    _check_frames(m, p)
    return np.exp(0.5 * (log_local_maxwellian(m, grid) - log_global_maxwellian(p, grid)))


def f_to_h(f: np.ndarray, m: FluidMoments, p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    return frame_ratio(m, p, grid) * f


def h_to_f(h: np.ndarray, m: FluidMoments, p: GlobalMaxwellianParams, grid: VelocityGrid) -> np.ndarray:
    return h / frame_ratio(m, p, grid)
