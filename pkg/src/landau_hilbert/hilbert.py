"""Order-by-order construction of the Hilbert expansion coefficients.

With F_0 = M and the force G_n = E_n + v x B_n (zero on the Landau branch),
the order-n equation of the hierarchy is

    d_t F_n + v . grad_x F_n - sum_{i+j=n} G_i . grad_v F_j = sum_{i+j=n+1} C(F_i, F_j).

Each coefficient splits as F_n = macro_n + M^{1/2} f_n with f_n orthogonal to
N_M:

* the microscopic part comes from the order n-1 equation,
  L_M f_n = M^{-1/2} [ sum_{i,j>=1, i+j=n} C(F_i, F_j) - (order n-1 transport terms) ];
* the macroscopic part carries the conserved moments U_n = int (1, v, |v|^2/2) F_n dv,
  evolved by the moments of the order-n equation (collisions drop out), with the
  microscopic fluxes entering on the right-hand side.

Time derivatives: background and macroscopic parts are differentiated exactly
by the chain rule through the fluid and moment right-hand sides; microscopic
parts by fourth-order differencing of snapshots. The stored derivatives are the
ones the residual and the remainder solver use, so solvability at every order
holds to round-off.

The order 2k-1 equation is not imposed (it would need F_{2k}); its
microscopic mismatch is the leading term of the truncation residual.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .collision import LinearizedOperator, get_operator
from .fluid import FluidState, FluidTrajectory, fluid_rhs, primitive_rates, curl
from .grid import SpatialGrid, VelocityGrid, integrate_v, spectral_derivative
from .linsolve import ConvergenceError, auto_preconditioner, batched_cg
from .maxwellian import R_GAS, FluidMoments, log_local_maxwellian
from .projection import MacroBasis, build_local_basis, hydro_fields

SOLVABILITY_WARN = 1e-8


class SolvabilityWarning(RuntimeWarning):
    """An inversion right-hand side had a null-space component that was projected away."""


class SamplingError(ValueError):
    """The fluid trajectory is too coarse for fourth-order time differencing."""


# ---------------------------------------------------------------- kinetic helpers


def _ex(a: np.ndarray, extra: int = 3) -> np.ndarray:
    return np.reshape(a, np.shape(a) + (1,) * extra)


def psi_basis(vgrid: VelocityGrid) -> np.ndarray:
    """Collision invariants (1, v_1, v_2, v_3, |v|^2 / 2)."""
    v = vgrid.mesh
    return np.stack([np.ones(vgrid.shape), v[0], v[1], v[2], 0.5 * vgrid.speed2])


def conserved_moments(F: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    psi = psi_basis(vgrid)
    return np.stack([integrate_v(F * psi[a], vgrid) for a in range(5)], axis=-1)


def free_transport(F: np.ndarray, sgrid: SpatialGrid, vgrid: VelocityGrid) -> np.ndarray:
    """v . grad_x F with spectral x-derivatives."""
    out = np.zeros_like(F)
    for d in range(sgrid.dim_x):
        out += vgrid.mesh[d] * spectral_derivative(F, sgrid, axis=d)
    return out


def zero_flux_gradient(F: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """Centered velocity differences with F = 0 beyond the cube.

    Written as face fluxes (F_i + F_{i+1}) / 2 with zero flux through the outer
    faces, so each component sums to zero over the grid.
    """
    h = vgrid.spacing
    out = []
    for d in range(3):
        ax = F.ndim - 3 + d
        Fm = np.moveaxis(F, ax, -1)
        face = np.zeros(Fm.shape[:-1] + (Fm.shape[-1] + 1,))
        face[..., 1:-1] = 0.5 * (Fm[..., 1:] + Fm[..., :-1])
        out.append(np.moveaxis((face[..., 1:] - face[..., :-1]) / h, -1, ax))
    return np.stack(out)


def force_term(E: np.ndarray, B: np.ndarray, F: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """(E + v x B) . grad_v F in zero-flux form.

    Component d of E + v x B does not depend on v_d, so this equals
    div_v((E + v x B) F) discretely and integrates to zero over velocity.
    """
    v = vgrid.mesh
    dF = zero_flux_gradient(F, vgrid)
    Ex = [_ex(E[..., i]) for i in range(3)]
    Bx = [_ex(B[..., i]) for i in range(3)]
    G = [
        Ex[0] + v[1] * Bx[2] - v[2] * Bx[1],
        Ex[1] + v[2] * Bx[0] - v[0] * Bx[2],
        Ex[2] + v[0] * Bx[1] - v[1] * Bx[0],
    ]
    return G[0] * dF[0] + G[1] * dF[1] + G[2] * dF[2]


def maxwellian_rate(m: FluidMoments, rates, vgrid: VelocityGrid) -> np.ndarray:
    """d_t log M for moment rates (d_t rho, d_t u, d_t T)."""
    drho, du, dT = rates
    v = vgrid.mesh
    RT = R_GAS * _ex(m.T)
    w = [v[i] - _ex(m.u[..., i]) for i in range(3)]
    w2 = w[0] ** 2 + w[1] ** 2 + w[2] ** 2
    out = _ex(drho / m.rho)
    out = out + sum(w[i] * _ex(du[..., i]) for i in range(3)) / RT
    out = out + (w2 / (2.0 * RT) - 1.5) * _ex(dT / m.T)
    return out


def spatial_log_gradient(m: FluidMoments, sgrid: SpatialGrid, vgrid: VelocityGrid) -> np.ndarray:
    """v . grad_x log M, exact through the spectral gradients of (rho, u, T)."""
    out = np.zeros(m.shape + vgrid.shape)
    for d in range(sgrid.dim_x):
        rates = (
            spectral_derivative(m.rho, sgrid, axis=d),
            spectral_derivative(m.u, sgrid, axis=d),
            spectral_derivative(m.T, sgrid, axis=d),
        )
        out += vgrid.mesh[d] * maxwellian_rate(m, rates, vgrid)
    return out


class MacroMap:
    """macro(U) = M sum_a c_a psi_a with Gram(M) c = U, and its exact time derivative."""

    def __init__(self, M: np.ndarray, dM: np.ndarray, vgrid: VelocityGrid):
        self.vgrid = vgrid
        self.psi = psi_basis(vgrid)
        self.M = M
        self.dM = dM
        w = vgrid.weight
        self.gram = np.einsum("avwz,bvwz,...vwz->...ab", self.psi, self.psi, M) * w
        self.dgram = np.einsum("avwz,bvwz,...vwz->...ab", self.psi, self.psi, dM) * w

    def coeffs(self, U: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.gram, U[..., None])[..., 0]

    def field(self, U: np.ndarray) -> np.ndarray:
        c = self.coeffs(U)
        return self.M * np.einsum("...a,avwz->...vwz", c, self.psi)

    def rate(self, U: np.ndarray, dU: np.ndarray) -> np.ndarray:
        c = self.coeffs(U)
        dc = np.linalg.solve(self.gram, (dU - np.einsum("...ab,...b->...a", self.dgram, c))[..., None])[..., 0]
        return self.dM * np.einsum("...a,avwz->...vwz", c, self.psi) + self.M * np.einsum(
            "...a,avwz->...vwz", dc, self.psi
        )


# ---------------------------------------------------------------- pseudo-inverse


def null_content(r: np.ndarray, basis: MacroBasis) -> float:
    """max_x |P_M r| / max_x |r|, the solvability defect of a batch of right-hand sides."""
    leak = np.sqrt(np.sum(basis.coefficients(r) ** 2, axis=-1))
    rnorm = np.sqrt(np.sum(r * r, axis=(-3, -2, -1)) * basis.grid.weight)
    top = float(np.max(rnorm, initial=0.0))
    return float(np.max(leak, initial=0.0)) / top if top > 0 else 0.0


@dataclass
class InversionLog:
    warnings: list[str] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)


def invert_LM(
    r: np.ndarray,
    basis: MacroBasis,
    op: LinearizedOperator | None = None,
    tol: float = 1e-11,
    maxiter: int = 3000,
    preconditioner: str = "auto",
    log: InversionLog | None = None,
) -> np.ndarray:
    """The g with L_M g = r and P_M g = 0, cell by cell.

    A right-hand side with null-space content above 1e-8 relative is projected
    first and a ``SolvabilityWarning`` is issued.
    """
    grid = basis.grid
    r = np.asarray(r, dtype=float)
    if op is None:
        op = LinearizedOperator(grid, log_local_maxwellian(basis.moments, grid))
    rel = null_content(r, basis)
    if rel > SOLVABILITY_WARN:
        msg = f"right-hand side has null-space content {rel:.2e}; projected before inversion"
        warnings.warn(msg, SolvabilityWarning, stacklevel=2)
        if log is not None:
            log.warnings.append(msg)

    def project(z):
        c = basis.coefficients(z)
        return z - np.sum(c[..., None, None, None] * basis.chi, axis=-4)

    # Cells whose right-hand side is null-space content only solve to zero.
    rc = project(r)
    before = np.sqrt(np.sum(r * r, axis=(-3, -2, -1)))
    after = np.sqrt(np.sum(rc * rc, axis=(-3, -2, -1)))
    r = np.where((after <= 1e-10 * before)[..., None, None, None], 0.0, rc)

    pre = auto_preconditioner(grid, basis.moments.T, preconditioner)
    precond = None if pre is None else (lambda z: pre.pinv(z, basis.moments.rho))
    g, info = batched_cg(op, r, tol=tol, maxiter=maxiter, precond=precond, project=project)
    if log is not None:
        log.iterations.append(info.iterations)
    if np.any(info.residual > max(tol, 1e-9)):
        raise ConvergenceError(
            f"invert_LM stalled after {info.iterations} iterations, residual {np.max(info.residual):.2e}; "
            f"Ritz spectrum [{info.ritz_min:.3e}, {info.ritz_max:.3e}] (smallest value estimates the gap)"
        )
    return g


# ---------------------------------------------------------------- expansion set


@dataclass
class Snapshot:
    """Background quantities at one time level."""

    state: FluidState
    moments: FluidMoments
    logM: np.ndarray
    M: np.ndarray
    dM: np.ndarray
    sqrtM: np.ndarray
    basis: MacroBasis
    macro: MacroMap
    op: LinearizedOperator | None = None

    @property
    def E(self) -> np.ndarray:
        return self.state.E if self.state.E is not None else np.zeros(self.moments.shape + (3,))

    @property
    def B(self) -> np.ndarray:
        return self.state.B if self.state.B is not None else np.zeros(self.moments.shape + (3,))


def make_snapshot(state: FluidState, sgrid: SpatialGrid, vgrid: VelocityGrid, with_operator: bool = True) -> Snapshot:
    m = state.moments
    logM = log_local_maxwellian(m, vgrid)
    M = np.exp(logM)
    rates = primitive_rates(state, fluid_rhs(state, sgrid))
    dM = M * maxwellian_rate(m, rates, vgrid)
    op = LinearizedOperator(vgrid, logM) if with_operator else None
    return Snapshot(state, m, logM, M, dM, np.exp(0.5 * logM), build_local_basis(m, vgrid), MacroMap(M, dM, vgrid), op)


@dataclass
class ExpansionSet:
    """Coefficients F_n and their time derivatives on a uniform snapshot grid.

    ``F[n, i]`` is F_n at ``times[i]``; ``F[0]`` is the local Maxwellian.
    ``E``/``B`` hold the field coefficients (E_0, B_0 the background fields).
    """

    k: int
    branch: str
    sgrid: SpatialGrid
    vgrid: VelocityGrid
    times: np.ndarray
    snapshots: list[Snapshot]
    F: np.ndarray
    dF: np.ndarray
    U: np.ndarray
    E: np.ndarray
    B: np.ndarray
    dE: np.ndarray
    dB: np.ndarray
    solvability: np.ndarray  # [n, i]: relative null-space content of the order-n inversion source
    log: InversionLog = field(default_factory=InversionLog)

    @property
    def order(self) -> int:
        return 2 * self.k - 1

    def hydro(self, n: int, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-order (rho_n, u_n, T_n) read off from the macroscopic part of f_n."""
        snap = self.snapshots[i]
        return hydro_fields(self.F[n, i] / snap.sqrtM, snap.basis)

    def force(self, n: int, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.E[n, i], self.B[n, i]

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {"times": self.times, "F": self.F, "dF": self.dF, "U": self.U, "E": self.E, "B": self.B}


def _fd_weights(offsets: np.ndarray) -> np.ndarray:
    """First-derivative weights on the given integer offsets (exact for degree len-1)."""
    n = len(offsets)
    A = np.vander(offsets.astype(float), n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(A, rhs)


def time_derivative(series: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order five-point derivative along axis 0 (one-sided near the ends)."""
    N = series.shape[0]
    if N < 5:
        raise SamplingError(f"need at least 5 snapshots for fourth-order differencing, got {N}")
    out = np.empty_like(series)
    for i in range(N):
        start = min(max(i - 2, 0), N - 5)
        offs = np.arange(start, start + 5) - i
        w = _fd_weights(offs)
        out[i] = np.tensordot(w, series[start : start + 5], axes=(0, 0)) / dt
    return out


def _lagrange_half(series: np.ndarray, i: int) -> np.ndarray:
    """Cubic interpolation at i + 1/2 from four neighbouring samples."""
    N = series.shape[0]
    start = min(max(i - 1, 0), N - 4)
    nodes = np.arange(start, start + 4, dtype=float)
    x = i + 0.5
    out = 0.0
    for a in range(4):
        la = np.prod([(x - nodes[b]) / (nodes[a] - nodes[b]) for b in range(4) if b != a])
        out = out + la * series[start + a]
    return out


def _collision_pairs(snap: Snapshot, Fs: list[np.ndarray], n: int, vgrid: VelocityGrid) -> np.ndarray:
    """sum_{i+j=n, i,j>=1} C_M(F_i, F_j) with the flux form weighted by the local Maxwellian."""
    op = get_operator(vgrid)
    frame = op.frame(snap.logM)
    out = np.zeros_like(snap.M)
    for i in range(1, n):
        j = n - i
        if i > j:
            break
        c = op.collide_weighted(Fs[i], Fs[j], frame)
        if i != j:
            c = c + op.collide_weighted(Fs[j], Fs[i], frame)
        out += c
    return out


def _moment_rate(
    sgrid: SpatialGrid,
    vgrid: VelocityGrid,
    F_n: np.ndarray,
    force_pairs: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
) -> np.ndarray:
    """dU_n/dt = -int psi [v . grad_x F_n - sum G_i . grad_v F_j] dv."""
    lhs = free_transport(F_n, sgrid, vgrid)
    for E, B, Fj in force_pairs:
        lhs = lhs - force_term(E, B, Fj, vgrid)
    return -conserved_moments(lhs, vgrid)


def build_coefficients(
    trajectory: FluidTrajectory,
    sgrid: SpatialGrid,
    vgrid: VelocityGrid,
    k: int = 3,
    branch: str = "landau",
    stride: int = 2,
    initial_U: np.ndarray | None = None,
    tol: float = 1e-11,
    preconditioner: str = "auto",
) -> ExpansionSet:
    """Cascade on snapshots ``trajectory.states[::stride]``.

    The macroscopic moment system is advanced by classical RK4 between
    snapshots, using the fluid states half way between them (hence an even
    ``stride``) and cubic time interpolation of lower-order data.
    ``initial_U[n]`` sets the conserved moments of F_n at t = 0 (default zero).
    """
    if branch not in ("landau", "vml"):
        raise ValueError(f"unknown branch {branch!r}")
    if k < 2:
        raise ValueError("k must be at least 2")
    if stride < 2 or stride % 2:
        raise ValueError("stride must be a positive even integer")
    states = trajectory.states
    snaps_idx = list(range(0, len(states), stride))
    Nt = len(snaps_idx)
    if Nt < 5:
        raise SamplingError(f"trajectory gives {Nt} snapshots; fourth-order time derivatives need at least 5")
    times = np.array([states[j].time for j in snaps_idx])
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
        raise SamplingError("snapshots must be uniformly spaced")
    dt = float(dts[0])
    if branch == "vml" and states[0].E is None:
        raise ValueError("VML branch needs a Euler-Maxwell trajectory")

    snaps = [make_snapshot(states[j], sgrid, vgrid) for j in snaps_idx]
    halves = [make_snapshot(states[j + stride // 2], sgrid, vgrid, with_operator=False) for j in snaps_idx[:-1]]
    order = 2 * k - 1
    S = sgrid.shape
    F = np.zeros((order + 1, Nt) + S + vgrid.shape)
    dF = np.zeros_like(F)
    U = np.zeros((order + 1, Nt) + S + (5,))
    Ef = np.zeros((order + 1, Nt) + S + (3,))
    Bf = np.zeros_like(Ef)
    dEf = np.zeros_like(Ef)
    dBf = np.zeros_like(Ef)
    solv = np.zeros((order + 1, Nt))
    log = InversionLog()
    vml = branch == "vml"

    for i, snap in enumerate(snaps):
        F[0, i] = snap.M
        U[0, i] = conserved_moments(snap.M, vgrid)
        Ef[0, i], Bf[0, i] = snap.E, snap.B
        # Conserved moments of d_t M follow the discrete moment balance, which
        # differs from the fluid rates by quadrature error.
        pairs = [(snap.E, snap.B, snap.M)] if branch == "vml" else []
        gap = _moment_rate(sgrid, vgrid, snap.M, pairs) - conserved_moments(snap.dM, vgrid)
        dF[0, i] = snap.dM + snap.macro.field(gap)
    if vml:
        for i, snap in enumerate(snaps):
            st = snap.state
            dEf[0, i] = curl(st.B, sgrid) + 4.0 * np.pi * st.rho[..., None] * st.u
            dBf[0, i] = -curl(st.E, sgrid)

    for n in range(1, order + 1):
        # Microscopic part from the order n-1 equation.
        micro = np.zeros((Nt,) + S + vgrid.shape)
        for i, snap in enumerate(snaps):
            src = _collision_pairs(snap, [F[j, i] for j in range(n + 1)], n, vgrid)
            src = src - dF[n - 1, i] - free_transport(F[n - 1, i], sgrid, vgrid)
            if vml:
                for a in range(n):
                    src = src + force_term(Ef[a, i], Bf[a, i], F[n - 1 - a, i], vgrid)
            r = src / snap.sqrtM
            solv[n, i] = null_content(r, snap.basis)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SolvabilityWarning)
                g = invert_LM(r, snap.basis, snap.op, tol=tol, preconditioner=preconditioner, log=log)
            micro[i] = snap.sqrtM * g
        dmicro = time_derivative(micro, dt)

        # Macroscopic part: moments of the order-n equation, RK4 over snapshots.
        lower_half = {j: [_lagrange_half(F[j], i) for i in range(Nt - 1)] for j in range(1, n)} if vml else {}
        E_half = {j: [_lagrange_half(Ef[j], i) for i in range(Nt - 1)] for j in range(1, n)} if vml else {}
        B_half = {j: [_lagrange_half(Bf[j], i) for i in range(Nt - 1)] for j in range(1, n)} if vml else {}
        micro_half = [_lagrange_half(micro, i) for i in range(Nt - 1)]

        def rates(level, idx, Un, En, Bn):
            """Right-hand sides at a snapshot (level 0) or a half step (level 1)."""
            snap = snaps[idx] if level == 0 else halves[idx]
            mic = micro[idx] if level == 0 else micro_half[idx]
            Fn = snap.macro.field(Un) + mic
            pairs = []
            if vml:
                pairs.append((snap.E, snap.B, Fn))
                pairs.append((En, Bn, snap.M))
                for a in range(1, n):
                    Ea = Ef[a, idx] if level == 0 else E_half[a][idx]
                    Ba = Bf[a, idx] if level == 0 else B_half[a][idx]
                    Fb = F[n - a, idx] if level == 0 else lower_half[n - a][idx]
                    pairs.append((Ea, Ba, Fb))
            dU = _moment_rate(sgrid, vgrid, Fn, pairs)
            if vml:
                j_n = Un[..., 1:4]
                dE = curl(Bn, sgrid) + 4.0 * np.pi * j_n
                dB = -curl(En, sgrid)
            else:
                dE = dB = np.zeros_like(En)
            return dU, dE, dB, Fn

        if initial_U is not None:
            U[n, 0] = initial_U[n]
        if vml:
            Ef[n, 0], Bf[n, 0] = gauss_field(U[n, 0][..., 0], sgrid), np.zeros(S + (3,))
        for i in range(Nt):
            dU, dE, dB, Fn = rates(0, i, U[n, i], Ef[n, i], Bf[n, i])
            F[n, i] = Fn
            dF[n, i] = snaps[i].macro.rate(U[n, i], dU) + dmicro[i]
            dEf[n, i], dBf[n, i] = dE, dB
            if i == Nt - 1:
                break
            k1 = (dU, dE, dB)
            y2 = [U[n, i] + 0.5 * dt * k1[0], Ef[n, i] + 0.5 * dt * k1[1], Bf[n, i] + 0.5 * dt * k1[2]]
            k2 = rates(1, i, *y2)[:3]
            y3 = [U[n, i] + 0.5 * dt * k2[0], Ef[n, i] + 0.5 * dt * k2[1], Bf[n, i] + 0.5 * dt * k2[2]]
            k3 = rates(1, i, *y3)[:3]
            y4 = [U[n, i] + dt * k3[0], Ef[n, i] + dt * k3[1], Bf[n, i] + dt * k3[2]]
            k4 = rates(0, i + 1, *y4)[:3]
            U[n, i + 1] = U[n, i] + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            Ef[n, i + 1] = Ef[n, i] + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            Bf[n, i + 1] = Bf[n, i] + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])

    return ExpansionSet(k, branch, sgrid, vgrid, times, snaps, F, dF, U, Ef, Bf, dEf, dBf, solv, log)


def gauss_field(mass_n: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    """Curl-free E with div E = -4 pi mass_n (zero mean part dropped)."""
    E = np.zeros(mass_n.shape + (3,))
    if not np.any(mass_n):
        return E
    k = sgrid.wavenumbers
    axes = tuple(range(sgrid.dim_x))
    mhat = np.fft.fftn(mass_n, axes=axes)
    K = np.meshgrid(*([k] * sgrid.dim_x), indexing="ij")
    k2 = sum(kk**2 for kk in K)
    safe = np.where(k2 > 0, k2, 1.0)
    for d in range(sgrid.dim_x):
        Ehat = np.where(k2 > 0, 1j * K[d] * 4.0 * np.pi * mhat / safe, 0.0)
        E[..., d] = np.real(np.fft.ifftn(Ehat, axes=axes))
    return E


# ---------------------------------------------------------------- residual and forcing


def truncated_field(es: ExpansionSet, eps: float, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(F_tilde, d_t F_tilde, E_tilde, B_tilde) at snapshot i."""
    pw = eps ** np.arange(es.order + 1)
    Ft = np.tensordot(pw, es.F[:, i], axes=(0, 0))
    dFt = np.tensordot(pw, es.dF[:, i], axes=(0, 0))
    Et = np.tensordot(pw, es.E[:, i], axes=(0, 0))
    Bt = np.tensordot(pw, es.B[:, i], axes=(0, 0))
    return Ft, dFt, Et, Bt


def truncation_residual(es: ExpansionSet, eps: float, i: int) -> np.ndarray:
    """R = d_t F~ + v . grad_x F~ - G~ . grad_v F~ - C(F~, F~) / eps, evaluated on the summed field."""
    snap = es.snapshots[i]
    Ft, dFt, Et, Bt = truncated_field(es, eps, i)
    op = get_operator(es.vgrid)
    R = dFt + free_transport(Ft, es.sgrid, es.vgrid)
    if es.branch == "vml":
        R = R - force_term(Et, Bt, Ft, es.vgrid)
    R = R - op.collide_weighted(Ft, Ft, op.frame(snap.logM)) / eps
    return R


def expansion_residual(es: ExpansionSet, eps: float, i: int) -> float:
    """L^2(x, v) norm of the truncation residual at snapshot i."""
    R = truncation_residual(es, eps, i)
    return float(np.sqrt(np.sum(R * R) * es.sgrid.cell_volume * es.vgrid.weight))


def order_defects(es: ExpansionSet, i: int) -> dict[int, np.ndarray]:
    """D_n with R = sum_n eps^n D_n, n = -1 .. 2(2k-1), built order by order from pairs."""
    snap = es.snapshots[i]
    op = get_operator(es.vgrid)
    frame = op.frame(snap.logM)
    N = es.order
    pair = {}
    for a in range(N + 1):
        for b in range(a, N + 1):
            c = op.collide_weighted(es.F[a, i], es.F[b, i], frame)
            if a != b:
                c = c + op.collide_weighted(es.F[b, i], es.F[a, i], frame)
            pair[(a, b)] = c
    D = {}
    for n in range(-1, 2 * N + 1):
        d = np.zeros_like(snap.M)
        if 0 <= n <= N:
            d = d + es.dF[n, i] + free_transport(es.F[n, i], es.sgrid, es.vgrid)
        if es.branch == "vml":
            for a in range(max(0, n - N), min(n, N) + 1):
                d = d - force_term(es.E[a, i], es.B[a, i], es.F[n - a, i], es.vgrid)
        for a in range(max(0, n + 1 - N), N + 1):
            b = n + 1 - a
            if a <= b <= N:
                d = d - pair[(a, b)]
        D[n] = d
    return D


def remainder_forcing(es: ExpansionSet, eps: float, i: int, route: str = "assembled") -> np.ndarray:
    """The forcing P = -eps^{-k} R of the F_R equation.

    ``assembled`` sums the order defects (the double sum over
    i + j >= 2k + 1 plus the unimposed order 2k-1 mismatch and the solver-level
    defects of lower orders); ``residual`` evaluates R on the summed field.
    """
    if route == "residual":
        return -truncation_residual(es, eps, i) / eps**es.k
    if route != "assembled":
        raise ValueError(f"unknown route {route!r}")
    D = order_defects(es, i)
    R = sum(eps**n * d for n, d in D.items())
    return -R / eps**es.k


def decay_profile(es: ExpansionSet, n: int, i: int, radii=(2.0, 4.0, 6.0)) -> np.ndarray:
    """max_x |F_n / sqrt(M)| at the grid nodes nearest |v - u| = r sqrt(R T), for each r."""
    snap = es.snapshots[i]
    ratio = np.abs(es.F[n, i] / snap.sqrtM)
    v = es.vgrid.mesh
    out = []
    for r in radii:
        vals = []
        for idx in np.ndindex(*snap.moments.shape):
            m = snap.moments.cell(idx)
            w = np.sqrt(sum((v[a] - m.u[a]) ** 2 for a in range(3)))
            target = r * np.sqrt(R_GAS * float(m.T))
            shell = np.abs(w - target) <= 0.5 * es.vgrid.spacing * np.sqrt(3.0)
            vals.append(float(np.max(ratio[idx][shell])) if np.any(shell) else np.nan)
        out.append(np.nanmax(vals))
    return np.array(out)


def first_order_micro(
    state: FluidState, sgrid: SpatialGrid, vgrid: VelocityGrid, tol: float = 1e-11, preconditioner: str = "auto"
) -> np.ndarray:
    """F_1 at one time level with zero macroscopic part: sqrt(M) L_M^-1 M^-1/2 (G . grad_v M - d_t M - v . grad_x M)."""
    snap = make_snapshot(state, sgrid, vgrid)
    src = -snap.dM - free_transport(snap.M, sgrid, vgrid)
    if state.E is not None:
        src = src + force_term(snap.E, snap.B, snap.M, vgrid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SolvabilityWarning)
        g = invert_LM(src / snap.sqrtM, snap.basis, snap.op, tol=tol, preconditioner=preconditioner)
    return snap.sqrtM * g
