"""Time integration of the remainder equations and of the unexpanded kinetic equation.

The remainder F_R = sqrt(M) f = sqrt(mu) h obeys

    d_t F_R + v . grad_x F_R - G . grad_v F_R - G_R . grad_v M - eps^-1 [C(F_R, M) + C(M, F_R)]
      = eps^(k-1) C(F_R, F_R) + sum_i eps^(i-1) [C(F_i, F_R) + C(F_R, F_i)]
        + eps^k G_R . grad_v F_R + sum_i eps^i [G_i . grad_v F_R + G_R . grad_v F_i] + P

with G = E + v x B, G_i, G_R the background, coefficient and remainder forces
(all zero on the Landau branch) and P = -eps^-k R(F_tilde) the forcing left by
the truncated expansion. One discrete bilinear form, the flux-form operator
weighted by the local Maxwellian, serves both frames, so the f and h equations
are the same discrete PDE written in two variables.

Stepping is first-order Lie splitting: exact spectral free transport, explicit
Euler for every non-stiff term, then the implicit solve
(I + dt/eps L_M) f = f* cell by cell.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .collision import LinearizedOperator, get_operator
from .fluid import curl, gauss_residual
from .grid import SpatialGrid, VelocityGrid, integrate_v
from .hilbert import (
    ExpansionSet,
    _ex,
    force_term,
    free_transport,
    remainder_forcing,
    spatial_log_gradient,
    gauss_field,
)
from .projection import MacroBasis, build_local_basis, project_PM
from .linsolve import ConvergenceError, auto_preconditioner, batched_cg
from .maxwellian import (
    R_GAS,
    GlobalMaxwellianParams,
    choose_T_c,
    f_to_h,
    log_global_maxwellian,
    log_local_maxwellian,
    moments_of,
)

FRAME_TOL = 1e-8
POSITIVITY_TOL = 1e-8


class NegativityWarning(RuntimeWarning):
    """The distribution dipped below -1e-8 max F."""


@dataclass(frozen=True)
class RemainderState:
    f: np.ndarray
    h: np.ndarray
    E_R: np.ndarray | None
    B_R: np.ndarray | None
    eps: float
    time: float
    index: int = 0  # snapshot of the expansion set at ``time``


@dataclass
class EventLog:
    events: list[str] = field(default_factory=list)

    def add(self, msg: str) -> None:
        self.events.append(msg)


def global_params(es: ExpansionSet, margin: float = 0.05) -> GlobalMaxwellianParams:
    return choose_T_c(min(float(np.min(s.moments.T)) for s in es.snapshots), margin)


def initial_state(
    es: ExpansionSet, eps: float, F_R: np.ndarray | None = None, p: GlobalMaxwellianParams | None = None
) -> RemainderState:
    """State at snapshot 0 from a given F_R (default zero); E_R solves the Gauss law."""
    snap = es.snapshots[0]
    p = p or global_params(es)
    F_R = np.zeros_like(snap.M) if F_R is None else np.asarray(F_R, dtype=float)
    f = F_R / snap.sqrtM
    h = f_to_h(f, snap.moments, p, es.vgrid)
    E_R = B_R = None
    if es.branch == "vml":
        E_R = gauss_field(integrate_v(F_R, es.vgrid), es.sgrid)
        B_R = np.zeros_like(E_R)
    return RemainderState(f, h, E_R, B_R, float(eps), float(es.times[0]), 0)


# ---------------------------------------------------------------- frames


@dataclass(frozen=True, eq=False)
class _Frame:
    """F_R = S g with the log-derivatives of S needed by the product rule."""

    S: np.ndarray
    dt_log: np.ndarray  # d_t log S
    dx_log: np.ndarray  # v . grad_x log S
    grad_log: np.ndarray  # grad_v log S, leading axis 3


def _m_frame(es: ExpansionSet, i: int) -> _Frame:
    snap = es.snapshots[i]
    m = snap.moments
    w = np.stack([es.vgrid.mesh[a] - _ex(m.u[..., a]) for a in range(3)])
    return _Frame(
        snap.sqrtM,
        0.5 * snap.dM / snap.M,
        0.5 * spatial_log_gradient(m, es.sgrid, es.vgrid),
        -w / (2.0 * R_GAS * _ex(m.T)),
    )


def _mu_frame(es: ExpansionSet, p: GlobalMaxwellianParams) -> _Frame:
    vg = es.vgrid
    zero = np.zeros(vg.shape)
    return _Frame(np.exp(0.5 * log_global_maxwellian(p, vg)), zero, zero, -vg.mesh / (2.0 * R_GAS * p.T_c))


def _force_vector(E: np.ndarray, B: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    v = vgrid.mesh
    Ex = [_ex(E[..., a]) for a in range(3)]
    Bx = [_ex(B[..., a]) for a in range(3)]
    return np.stack(
        [
            Ex[0] + v[1] * Bx[2] - v[2] * Bx[1],
            Ex[1] + v[2] * Bx[0] - v[0] * Bx[2],
            Ex[2] + v[0] * Bx[1] - v[1] * Bx[0],
        ]
    )


def _force_on(fr: _Frame, E, B, g, vgrid) -> np.ndarray:
    """S^-1 G . grad_v (S g), differencing the product so the mass flux telescopes."""
    return force_term(E, B, fr.S * g, vgrid) / fr.S


# ---------------------------------------------------------------- tendencies


@dataclass(frozen=True)
class Tendency:
    """d_t of the frame variable split as explicit + stiff; fields for the VML branch."""

    explicit: np.ndarray
    stiff: np.ndarray
    dE: np.ndarray | None = None
    dB: np.ndarray | None = None

    @property
    def total(self) -> np.ndarray:
        return self.explicit + self.stiff


def _maxwell_rates(state: RemainderState, F_R: np.ndarray, sgrid: SpatialGrid, vgrid: VelocityGrid):
    v = vgrid.mesh
    j = np.stack([integrate_v(F_R * v[a], vgrid) for a in range(3)], axis=-1)
    return curl(state.B_R, sgrid) + 4.0 * np.pi * j, -curl(state.E_R, sgrid)


def _frame_tendency(
    state: RemainderState, es: ExpansionSet, i: int, fr: _Frame, g: np.ndarray, stiff_part: str, forcing=None
) -> Tendency:
    eps, k = state.eps, es.k
    vg, sg = es.vgrid, es.sgrid
    snap = es.snapshots[i]
    op = get_operator(vg)
    frame = op.frame(snap.logM)
    S = fr.S
    F_R = S * g

    def C(a, b):
        return op.collide_weighted(a, b, frame)

    expl = -free_transport(g, sg, vg) - g * (fr.dt_log + fr.dx_log)
    expl = expl + eps ** (k - 1) * C(F_R, F_R) / S
    for n in range(1, es.order + 1):
        expl = expl + eps ** (n - 1) * (C(es.F[n, i], F_R) + C(F_R, es.F[n, i])) / S
    P = remainder_forcing(es, eps, i) if forcing is None else forcing
    expl = expl + P / S

    lin = (C(snap.M, F_R) + C(F_R, snap.M)) / (eps * S)
    if stiff_part == "M":
        stiff = lin
    else:
        # Split about mu: -eps^-1 L h is stiff, the L_d remainder stays explicit.
        mu = S * S
        stiff = (C(mu, F_R) + C(F_R, mu)) / (eps * S)
        expl = expl + (lin - stiff)

    dE = dB = None
    if es.branch == "vml":
        expl = expl + _force_on(fr, es.E[0, i], es.B[0, i], g, vg)
        expl = expl + force_term(state.E_R, state.B_R, snap.M, vg) / S
        expl = expl + eps**k * _force_on(fr, state.E_R, state.B_R, g, vg)
        for n in range(1, es.order + 1):
            expl = expl + eps**n * _force_on(fr, es.E[n, i], es.B[n, i], g, vg)
            expl = expl + eps**n * force_term(state.E_R, state.B_R, es.F[n, i], vg) / S
        dE, dB = _maxwell_rates(state, F_R, sg, vg)
    return Tendency(expl, stiff, dE, dB)


def rhs_f(state: RemainderState, es: ExpansionSet, i: int | None = None, forcing=None, route: str = "frame") -> Tendency:
    """Tendency of f; ``stiff`` is -eps^-1 L_M f.

    ``route="direct"`` differentiates the products sqrt(M) f numerically in the
    F_R frame instead of using the analytic log-derivatives of sqrt(M).
    """
    i = state.index if i is None else i
    if route == "frame":
        return _frame_tendency(state, es, i, _m_frame(es, i), state.f, "M", forcing)
    if route == "direct":
        return _direct_tendency(state, es, i, forcing)
    raise ValueError(f"unknown route {route!r}")


def rhs_h(state: RemainderState, es: ExpansionSet, p: GlobalMaxwellianParams, i: int | None = None, forcing=None) -> Tendency:
    """Tendency of h; ``stiff`` is -eps^-1 L h and -eps^-1 L_d h is part of ``explicit``."""
    i = state.index if i is None else i
    return _frame_tendency(state, es, i, _mu_frame(es, p), state.h, "mu", forcing)


def _collisional_FR(state: RemainderState, es: ExpansionSet, i: int, forcing) -> np.ndarray:
    """Every non-stiff term of d_t F_R except free transport, in the F_R frame."""
    eps, k = state.eps, es.k
    vg = es.vgrid
    snap = es.snapshots[i]
    op = get_operator(vg)
    frame = op.frame(snap.logM)
    F_R = snap.sqrtM * state.f

    def C(a, b):
        return op.collide_weighted(a, b, frame)

    d = eps ** (k - 1) * C(F_R, F_R)
    for n in range(1, es.order + 1):
        d = d + eps ** (n - 1) * (C(es.F[n, i], F_R) + C(F_R, es.F[n, i]))
    d = d + (remainder_forcing(es, eps, i) if forcing is None else forcing)
    if es.branch == "vml":
        d = d + force_term(es.E[0, i], es.B[0, i], F_R, vg)
        d = d + force_term(state.E_R, state.B_R, snap.M + eps**k * F_R, vg)
        for n in range(1, es.order + 1):
            d = d + eps**n * (force_term(es.E[n, i], es.B[n, i], F_R, vg) + force_term(state.E_R, state.B_R, es.F[n, i], vg))
    return d


def _direct_tendency(state: RemainderState, es: ExpansionSet, i: int, forcing) -> Tendency:
    snap = es.snapshots[i]
    op = get_operator(es.vgrid)
    frame = op.frame(snap.logM)
    F_R = snap.sqrtM * state.f
    d = _collisional_FR(state, es, i, forcing) - free_transport(F_R, es.sgrid, es.vgrid)
    dE = dB = None
    if es.branch == "vml":
        dE, dB = _maxwell_rates(state, F_R, es.sgrid, es.vgrid)
    # d_t f = (d_t F_R) / sqrt(M) - f d_t log sqrt(M)
    expl = d / snap.sqrtM - state.f * 0.5 * snap.dM / snap.M
    stiff = (op.collide_weighted(snap.M, F_R, frame) + op.collide_weighted(F_R, snap.M, frame)) / (state.eps * snap.sqrtM)
    return Tendency(expl, stiff, dE, dB)


def to_FR_frame(t: Tendency, g: np.ndarray, fr: _Frame) -> np.ndarray:
    """d_t F_R = S d_t g + g d_t S."""
    return fr.S * (t.total + g * fr.dt_log)


# ---------------------------------------------------------------- stepping


def free_flight(F: np.ndarray, dt: float, sgrid: SpatialGrid, vgrid: VelocityGrid) -> tuple[np.ndarray, np.ndarray]:
    """Exact periodic free transport over dt and the step-averaged current.

    Returns (F(t + dt), J) with rho(t + dt) = rho(t) - dt div J holding exactly.
    """
    axes = tuple(range(sgrid.dim_x))
    Fh = np.fft.fftn(F, axes=axes)
    k = sgrid.wavenumbers
    K = np.meshgrid(*([k] * sgrid.dim_x), indexing="ij")
    v = vgrid.mesh
    kv = sum(_ex(K[d]) * v[d] for d in range(sgrid.dim_x)) * dt
    phase = np.exp(-1j * kv)
    small = np.abs(kv) < 1e-12
    phi = np.where(small, 1.0, (1.0 - phase) / np.where(small, 1.0, 1j * kv))
    Fnew = np.real(np.fft.ifftn(Fh * phase, axes=axes))
    J = np.zeros(F.shape[: sgrid.dim_x] + (3,))
    for a in range(3):
        Ja = np.real(np.fft.ifftn(np.sum(Fh * phi * v[a], axis=(-3, -2, -1)), axes=axes))
        J[..., a] = Ja * vgrid.weight
    return Fnew, J


def implicit_collision(
    rhs: np.ndarray, op: LinearizedOperator, tau: float, rho: np.ndarray, T: np.ndarray, tol: float = 1e-11, maxiter: int = 3000,
    preconditioner: str = "auto",
    basis: MacroBasis | None = None,
) -> np.ndarray:
    """Solve (I + tau L_M) f = rhs cell by cell.

    With ``basis`` the macroscopic part of rhs is carried over unchanged, as
    it is for the exact operator; quadrature leaves L_M slightly off its null
    space and would otherwise leak mass, momentum and energy.
    """
    pre = auto_preconditioner(op.grid, T, preconditioner)
    precond = None if pre is None else (lambda z: pre.shifted(z, rho, tau))
    f, info = batched_cg(lambda z: z + tau * op(z), rhs, tol=tol, maxiter=maxiter, precond=precond)
    if np.any(info.residual > max(tol, 1e-9)):
        raise ConvergenceError(f"implicit collision solve stalled: residual {np.max(info.residual):.2e}")
    if basis is not None:
        f = f + project_PM(rhs - f, basis)
    return f


def step_imex(
    state: RemainderState,
    es: ExpansionSet,
    p: GlobalMaxwellianParams | None = None,
    log: EventLog | None = None,
    explicit_scale: float = 1.0,
    preconditioner: str = "auto",
    forcing: np.ndarray | None = None,
) -> RemainderState:
    """One step from snapshot ``index`` to ``index + 1``.

    ``explicit_scale = 0`` switches off every explicit term except transport,
    leaving the dissipative implicit collision.
    """
    i = state.index
    if i + 1 >= len(es.times):
        raise IndexError("expansion set exhausted")
    p = p or global_params(es)
    vg, sg = es.vgrid, es.sgrid
    dt = float(es.times[i + 1] - es.times[i])
    s0, s1 = es.snapshots[i], es.snapshots[i + 1]
    eps = state.eps

    F_R = s0.sqrtM * state.f
    moved, J = free_flight(F_R, dt, sg, vg)
    F_star = moved
    if explicit_scale:
        F_star = F_star + dt * explicit_scale * _collisional_FR(state, es, i, forcing)
    f_star = F_star / s1.sqrtM
    f_new = implicit_collision(
        f_star, s1.op, dt / eps, s1.moments.rho, s1.moments.T, preconditioner=preconditioner, basis=s1.basis
    )

    E_R, B_R = state.E_R, state.B_R
    if es.branch == "vml":
        B_R = state.B_R - dt * curl(state.E_R, sg)
        E_R = state.E_R + dt * (curl(B_R, sg) + 4.0 * np.pi * J)
    h_new = f_to_h(f_new, s1.moments, p, vg)
    if not np.all(np.isfinite(h_new)):
        raise FloatingPointError("h frame overflowed")
    new = RemainderState(f_new, h_new, E_R, B_R, eps, float(es.times[i + 1]), i + 1)
    return check_frames(new, es, p, log)


def check_frames(state: RemainderState, es: ExpansionSet, p: GlobalMaxwellianParams, log: EventLog | None = None) -> RemainderState:
    """Re-synchronise h from f when the two frames disagree beyond 1e-8 relative."""
    snap = es.snapshots[state.index]
    ref = f_to_h(state.f, snap.moments, p, es.vgrid)
    scale = np.linalg.norm(ref)
    gap = np.linalg.norm(state.h - ref)
    if gap > FRAME_TOL * max(scale, 1e-300):
        if log is not None:
            log.add(f"t={state.time:.6g}: frame gap {gap / max(scale, 1e-300):.2e}, h resynchronised from f")
        return replace(state, h=ref)
    return state


def reconstruct(state: RemainderState, es: ExpansionSet) -> np.ndarray:
    """F = sum_n eps^n F_n + eps^k sqrt(M) f at the state's snapshot."""
    i, eps = state.index, state.eps
    pw = eps ** np.arange(es.order + 1)
    return np.tensordot(pw, es.F[:, i], axes=(0, 0)) + eps**es.k * es.snapshots[i].sqrtM * state.f


def gauss_drift(state: RemainderState, es: ExpansionSet) -> float:
    """max |div E_R + 4 pi int F_R dv| over the resolved modes."""
    F_R = es.snapshots[state.index].sqrtM * state.f
    return float(np.max(np.abs(gauss_residual(state.E_R, integrate_v(F_R, es.vgrid), es.sgrid))))


# ---------------------------------------------------------------- full kinetic equation


@dataclass(frozen=True)
class FullState:
    F: np.ndarray
    E: np.ndarray | None = None
    B: np.ndarray | None = None
    time: float = 0.0


def positivity_ratio(F: np.ndarray) -> float:
    """min F / max F."""
    return float(np.min(F) / np.max(F))


def step_full(
    state: FullState,
    eps: float,
    dt: float,
    sgrid: SpatialGrid,
    vgrid: VelocityGrid,
    preconditioner: str = "auto",
    log: EventLog | None = None,
) -> FullState:
    """Transport exactly, apply the Lorentz force explicitly, then relax implicitly.

    The collision is linearized about the local Maxwellian M_F of the
    post-transport field: with F = M_F + sqrt(M_F) g,
    (I + dt/eps L) g_new = g + dt/eps Gamma(g, g).
    """
    F, J = free_flight(state.F, dt, sgrid, vgrid)
    E, B = state.E, state.B
    if E is not None:
        F = F + dt * force_term(state.E, state.B, state.F, vgrid)
        B = state.B - dt * curl(state.E, sgrid)
        E = state.E + dt * (curl(B, sgrid) + 4.0 * np.pi * J)
    m = moments_of(F, vgrid)
    logM = log_local_maxwellian(m, vgrid)
    op = LinearizedOperator(vgrid, logM)
    M = op.W
    g = (F - M) / op.sqrtW
    tau = dt / eps
    rhs = g + tau * op.gamma(g, g)
    g_new = implicit_collision(rhs, op, tau, m.rho, m.T, preconditioner=preconditioner, basis=build_local_basis(m, vgrid))
    F_new = M + op.sqrtW * g_new
    ratio = positivity_ratio(F_new)
    if ratio < -POSITIVITY_TOL:
        msg = f"t={state.time + dt:.6g}: min F / max F = {ratio:.2e}"
        warnings.warn(msg, NegativityWarning, stacklevel=2)
        if log is not None:
            log.add(msg)
    return FullState(F_new, E, B, state.time + dt)
