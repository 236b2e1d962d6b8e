"""Compressible Euler and Euler-Maxwell background flows on the periodic torus.

Conservative variables are mass rho, momentum rho u and total energy
rho (|u|^2 / 2 + T); with R = 2/3 the internal energy per unit mass equals T
and the pressure is p = rho R T. The Euler-Maxwell branch is isentropic with
T = rho^{2/3}, so p = (2/3) rho^{5/3}, and carries E, B with

    d_t E - curl B = 4 pi rho u,    d_t B + curl E = 0,
    div E = 4 pi (1 - rho),         div B = 0.

Two spatial schemes are available. ``spectral`` differentiates fluxes with the
Fourier derivative; it is the scheme coupled to the kinetic solvers and the
only one offered for the Maxwell branch, where the Fourier curl and divergence
form an exact mimetic pair (div curl = 0, and div E + 4 pi rho is invariant).
``fv`` is a second-order finite-volume scheme with unlimited linear
reconstruction and a Rusanov flux, meant for smooth data only.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .grid import SpatialGrid, drop_nyquist, spectral_derivative
from .maxwellian import R_GAS, FluidMoments

GAMMA_ADIABATIC = 5.0 / 3.0
DIVB_WARN = 1e-6


class VacuumError(RuntimeError):
    """Density or temperature reached a non-positive value."""


class CFLViolation(RuntimeError):
    """Requested step exceeds the advective stability bound."""


@dataclass(frozen=True)
class FluidState:
    rho: np.ndarray
    u: np.ndarray
    T: np.ndarray
    E: np.ndarray | None = None
    B: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=float)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "u", np.broadcast_to(np.asarray(self.u, dtype=float), rho.shape + (3,)).copy())
        object.__setattr__(self, "T", np.broadcast_to(np.asarray(self.T, dtype=float), rho.shape).copy())
        for name in ("E", "B"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.broadcast_to(np.asarray(val, dtype=float), rho.shape + (3,)).copy())

    @property
    def maxwell(self) -> bool:
        return self.E is not None

    @property
    def moments(self) -> FluidMoments:
        return FluidMoments(self.rho, self.u, self.T)

    def conservative(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mom = self.rho[..., None] * self.u
        energy = self.rho * (0.5 * np.sum(self.u**2, axis=-1) + self.T)
        return self.rho, mom, energy


@dataclass(frozen=True)
class FluidTendency:
    """Time derivatives of the conservative variables (and of E, B on the Maxwell branch)."""

    mass: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    E: np.ndarray | None = None
    B: np.ndarray | None = None

    def scaled_add(self, other: "FluidTendency", a: float) -> "FluidTendency":
        def comb(x, y):
            return None if x is None else x + a * y

        return FluidTendency(
            self.mass + a * other.mass,
            self.momentum + a * other.momentum,
            self.energy + a * other.energy,
            comb(self.E, other.E),
            comb(self.B, other.B),
        )


def _check_state(s: FluidState) -> None:
    if not np.all(s.rho > 0):
        raise VacuumError(f"density reached {np.min(s.rho):.3e} at t = {s.time}")
    if not np.all(s.T > 0):
        raise VacuumError(f"temperature reached {np.min(s.T):.3e} at t = {s.time}")


def _div(flux: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    """Spectral divergence of a field whose last axis indexes the 3 spatial components."""
    out = np.zeros(flux.shape[:-1])
    for d in range(sgrid.dim_x):
        out += spectral_derivative(flux[..., d], sgrid, axis=d)
    return out


def _grad(a: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    out = np.zeros(a.shape + (3,))
    for d in range(sgrid.dim_x):
        out[..., d] = spectral_derivative(a, sgrid, axis=d)
    return out


def curl(F: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    """Spectral curl; derivatives along axes beyond dim_x vanish."""
    dF = np.zeros(F.shape + (3,))  # dF[..., i, d] = d_d F_i
    for d in range(sgrid.dim_x):
        dF[..., d] = spectral_derivative(F, sgrid, axis=d)
    return np.stack(
        [dF[..., 2, 1] - dF[..., 1, 2], dF[..., 0, 2] - dF[..., 2, 0], dF[..., 1, 0] - dF[..., 0, 1]],
        axis=-1,
    )


def divergence(F: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    return _div(F, sgrid)


def gauss_residual(E: np.ndarray, charge: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    """div E + 4 pi charge on the modes a spectral divergence resolves."""
    return drop_nyquist(divergence(E, sgrid) + 4.0 * np.pi * charge, sgrid)


def _pressure(s: FluidState) -> np.ndarray:
    return s.rho * R_GAS * s.T


def _flux_tensor(s: FluidState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Physical fluxes (mass, momentum (..., i, d), energy) with last axis the direction."""
    rho, mom, energy = s.conservative()
    p = _pressure(s)
    f_mass = mom
    f_mom = rho[..., None, None] * s.u[..., :, None] * s.u[..., None, :] + p[..., None, None] * np.eye(3)
    f_energy = (energy + p)[..., None] * s.u
    return f_mass, f_mom, f_energy


def _spectral_euler(s: FluidState, sgrid: SpatialGrid) -> FluidTendency:
    f_mass, f_mom, f_energy = _flux_tensor(s)
    dmom = np.stack([_div(f_mom[..., i, :], sgrid) for i in range(3)], axis=-1)
    return FluidTendency(-_div(f_mass, sgrid), -dmom, -_div(f_energy, sgrid))


def _fv_euler(s: FluidState, sgrid: SpatialGrid) -> FluidTendency:
    rho, mom, energy = s.conservative()
    U = np.concatenate([rho[..., None], mom, energy[..., None]], axis=-1)
    out = np.zeros_like(U)
    for d in range(sgrid.dim_x):
        # Unlimited linear reconstruction of conservative variables: smooth data only.
        slope = 0.5 * (np.roll(U, -1, axis=d) - np.roll(U, 1, axis=d))
        UL = U + 0.5 * slope
        UR = np.roll(U - 0.5 * slope, -1, axis=d)
        FL, aL = _directional_flux(UL, d)
        FR, aR = _directional_flux(UR, d)
        a = np.maximum(aL, aR)[..., None]
        F = 0.5 * (FL + FR) - 0.5 * a * (UR - UL)
        out -= (F - np.roll(F, 1, axis=d)) / sgrid.spacing
    return FluidTendency(out[..., 0], out[..., 1:4], out[..., 4])


def _directional_flux(U: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    rho = U[..., 0]
    if not np.all(rho > 0):
        raise VacuumError("non-positive reconstructed density")
    u = U[..., 1:4] / rho[..., None]
    T = U[..., 4] / rho - 0.5 * np.sum(u**2, axis=-1)
    p = rho * R_GAS * T
    F = np.empty_like(U)
    F[..., 0] = U[..., 1 + d]
    F[..., 1:4] = U[..., 1:4] * u[..., d : d + 1]
    F[..., 1 + d] += p
    F[..., 4] = (U[..., 4] + p) * u[..., d]
    c = np.sqrt(GAMMA_ADIABATIC * R_GAS * np.maximum(T, 0.0))
    return F, np.abs(u[..., d]) + c


def euler_rhs(s: FluidState, sgrid: SpatialGrid, scheme: str = "spectral") -> FluidTendency:
    """Conservative tendencies of the compressible Euler system."""
    _check_state(s)
    if scheme == "spectral":
        return _spectral_euler(s, sgrid)
    if scheme == "fv":
        return _fv_euler(s, sgrid)
    raise ValueError(f"unknown scheme {scheme!r}")


def isentropic_temperature(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho) ** (2.0 / 3.0)


def euler_maxwell_rhs(s: FluidState, sgrid: SpatialGrid) -> FluidTendency:
    """Isentropic Euler-Maxwell tendencies; the energy slot carries the consistent rate of rho (|u|^2/2 + T)."""
    if not s.maxwell:
        raise ValueError("Euler-Maxwell branch needs E and B")
    _check_state(s)
    base = _spectral_euler(s, sgrid)
    lorentz = s.rho[..., None] * (s.E + np.cross(s.u, s.B))
    dmom = base.momentum - lorentz
    dE = curl(s.B, sgrid) + 4.0 * np.pi * s.rho[..., None] * s.u
    dB = -curl(s.E, sgrid)
    divB = np.max(np.abs(divergence(s.B, sgrid))) if sgrid.dim_x > 0 else 0.0
    if divB > DIVB_WARN:
        warnings.warn(f"div B drift {divB:.2e} exceeds {DIVB_WARN:g}", RuntimeWarning, stacklevel=2)
    # Energy follows from T = rho^{2/3}; it is not an independent unknown on this branch.
    drho = base.mass
    du = (dmom - s.u * drho[..., None]) / s.rho[..., None]
    dT = (2.0 / 3.0) * s.T / s.rho * drho
    dener = drho * (0.5 * np.sum(s.u**2, axis=-1) + s.T) + s.rho * (np.sum(s.u * du, axis=-1) + dT)
    return FluidTendency(drho, dmom, dener, dE, dB)


def primitive_rates(s: FluidState, tend: FluidTendency) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(d_t rho, d_t u, d_t T) implied by conservative tendencies."""
    drho = tend.mass
    du = (tend.momentum - s.u * drho[..., None]) / s.rho[..., None]
    e_int = s.T
    dT = (tend.energy - drho * (0.5 * np.sum(s.u**2, axis=-1) + e_int) - s.rho * np.sum(s.u * du, axis=-1)) / s.rho
    return drho, du, dT


def fluid_rhs(s: FluidState, sgrid: SpatialGrid, scheme: str = "spectral") -> FluidTendency:
    return euler_maxwell_rhs(s, sgrid) if s.maxwell else euler_rhs(s, sgrid, scheme)


def _apply(s: FluidState, tend: FluidTendency, dt: float) -> FluidState:
    rho, mom, energy = s.conservative()
    rho_n = rho + dt * tend.mass
    if not np.all(rho_n > 0):
        raise VacuumError(f"density reached {np.min(rho_n):.3e} at t = {s.time + dt}")
    u_n = (mom + dt * tend.momentum) / rho_n[..., None]
    if s.maxwell:
        T_n = isentropic_temperature(rho_n)
        E_n = s.E + dt * tend.E
        B_n = s.B + dt * tend.B
    else:
        T_n = (energy + dt * tend.energy) / rho_n - 0.5 * np.sum(u_n**2, axis=-1)
        E_n = B_n = None
    return FluidState(rho_n, u_n, T_n, E_n, B_n, s.time + dt)


def _combine(a: FluidState, b: FluidState, wa: float, wb: float) -> FluidState:
    ra, ma, ea = a.conservative()
    rb, mb, eb = b.conservative()
    rho = wa * ra + wb * rb
    u = (wa * ma + wb * mb) / rho[..., None]
    if a.maxwell:
        return FluidState(rho, u, isentropic_temperature(rho), wa * a.E + wb * b.E, wa * a.B + wb * b.B, b.time)
    T = (wa * ea + wb * eb) / rho - 0.5 * np.sum(u**2, axis=-1)
    return FluidState(rho, u, T, time=b.time)


def max_signal_speed(s: FluidState) -> float:
    c = np.sqrt(GAMMA_ADIABATIC * R_GAS * s.T)
    speed = float(np.max(np.linalg.norm(s.u, axis=-1) + c))
    return max(speed, 1.0) if s.maxwell else speed


def cfl_number(s: FluidState, dt: float, sgrid: SpatialGrid) -> float:
    return dt * max_signal_speed(s) / sgrid.spacing


def smooth_horizon(s: FluidState, sgrid: SpatialGrid, fraction: float = 0.5) -> float:
    """A fraction of the characteristic crossing time 1 / max |d_x (u +- c)|."""
    c = np.sqrt(GAMMA_ADIABATIC * R_GAS * s.T)
    rate = 0.0
    for d in range(sgrid.dim_x):
        for sign in (1.0, -1.0):
            lam = s.u[..., d] + sign * c
            rate = max(rate, float(np.max(np.abs(spectral_derivative(lam, sgrid, axis=d)))))
    return np.inf if rate == 0.0 else fraction / rate


@dataclass
class FluidTrajectory:
    states: list[FluidState] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])


def ssp_rk3_step(
    s: FluidState,
    dt: float,
    sgrid: SpatialGrid,
    scheme: str = "spectral",
    source: Callable[[float], FluidTendency] | None = None,
) -> FluidState:
    def rhs(state: FluidState) -> FluidTendency:
        tend = fluid_rhs(state, sgrid, scheme)
        return tend if source is None else tend.scaled_add(source(state.time), 1.0)

    s1 = _apply(s, rhs(s), dt)
    s2 = _combine(s, _apply(s1, rhs(s1), dt), 0.75, 0.25)
    s2 = replace(s2, time=s.time + 0.5 * dt)
    s3 = _combine(s, _apply(s2, rhs(s2), dt), 1.0 / 3.0, 2.0 / 3.0)
    return replace(s3, time=s.time + dt)


def advance_fluid(
    s: FluidState,
    dt: float,
    n_steps: int,
    sgrid: SpatialGrid,
    scheme: str = "spectral",
    cfl_max: float = 0.5,
    source: Callable[[float], FluidTendency] | None = None,
    grad_limit: float = 0.1,
) -> FluidTrajectory:
    """SSP-RK3 trajectory including the initial state, one snapshot per step.

    Aborts when dt exceeds the CFL bound or when max |grad u| dt reaches
    ``grad_limit`` (the smooth-regime monitor).
    """
    traj = FluidTrajectory([s])
    cur = s
    for _ in range(int(n_steps)):
        cfl = cfl_number(cur, dt, sgrid)
        if cfl > cfl_max:
            raise CFLViolation(f"CFL number {cfl:.3f} exceeds {cfl_max} at t = {cur.time}")
        steep = max(
            (float(np.max(np.abs(spectral_derivative(cur.u[..., d], sgrid, axis=d)))) for d in range(sgrid.dim_x)),
            default=0.0,
        )
        if steep * dt >= grad_limit:
            raise CFLViolation(f"max |grad u| dt = {steep * dt:.3f} reached the smooth-regime limit at t = {cur.time}")
        cur = ssp_rk3_step(cur, dt, sgrid, scheme, source)
        traj.states.append(cur)
    return traj


def acoustic_state(
    sgrid: SpatialGrid, amplitude: float = 1e-3, rho0: float = 1.0, T0: float = 1.0, mode: int = 1, maxwell: bool = False
) -> FluidState:
    """Right-moving small-amplitude acoustic wave along x_1."""
    x = sgrid.mesh[0]
    kx = 2.0 * np.pi * mode / sgrid.length
    c = np.sqrt(GAMMA_ADIABATIC * R_GAS * T0)
    wave = amplitude * np.sin(kx * x)
    rho = rho0 * (1.0 + wave)
    u = np.zeros(rho.shape + (3,))
    u[..., 0] = c * wave
    if maxwell:
        T = isentropic_temperature(rho)
        E = np.zeros(rho.shape + (3,))
        # Gauss law div E = 4 pi (1 - rho) fixes E_1 up to a constant.
        E[..., 0] = 4.0 * np.pi * rho0 * amplitude * np.cos(kx * x) / kx
        return FluidState(rho, u, T, E, np.zeros_like(E))
    T = T0 * (1.0 + (GAMMA_ADIABATIC - 1.0) * wave)
    return FluidState(rho, u, T)
