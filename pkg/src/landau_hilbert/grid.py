"""Truncated velocity cube and periodic spatial torus with midpoint quadrature.

Velocity nodes are cell centred, ``v_i = -v_max + (i + 1/2) h`` with
``h = 2 v_max / n_v``, so the grid is symmetric about the origin and no node
sits on the Coulomb singularity. Every velocity integral is the midpoint sum
``sum g h^3``. Fields carry arbitrary leading (batch or spatial) axes and the
three velocity axes last.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

VEL_AXES = (-3, -2, -1)


@dataclass(frozen=True)
class VelocityGrid:
    n_v: int = 24
    v_max: float = 6.0
    dim_v: int = 3

    def __post_init__(self) -> None:
        if int(self.n_v) != self.n_v or self.n_v < 8:
            raise ValueError(f"n_v must be an integer >= 8, got {self.n_v}")
        if not self.v_max > 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        if self.dim_v != 3:
            raise ValueError("only three velocity dimensions are supported")

    @property
    def spacing(self) -> float:
        return 2.0 * self.v_max / self.n_v

    @property
    def weight(self) -> float:
        return self.spacing**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_v,) * 3

    @cached_property
    def nodes(self) -> np.ndarray:
        return -self.v_max + (np.arange(self.n_v) + 0.5) * self.spacing

    @cached_property
    def mesh(self) -> np.ndarray:
        """Node coordinates, shape (3, n_v, n_v, n_v)."""
        return np.stack(np.meshgrid(self.nodes, self.nodes, self.nodes, indexing="ij"))

    @cached_property
    def speed2(self) -> np.ndarray:
        return np.sum(self.mesh**2, axis=0)


@dataclass(frozen=True)
class SpatialGrid:
    n_x: int = 32
    length: float = 2.0 * np.pi
    dim_x: int = 1

    def __post_init__(self) -> None:
        if int(self.n_x) != self.n_x or self.n_x < 4:
            raise ValueError(f"n_x must be an integer >= 4, got {self.n_x}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if self.dim_x not in (1, 2, 3):
            raise ValueError(f"dim_x must be 1, 2 or 3, got {self.dim_x}")

    @property
    def spacing(self) -> float:
        return self.length / self.n_x

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_x,) * self.dim_x

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim_x

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_x) * self.spacing

    @cached_property
    def mesh(self) -> np.ndarray:
        """Node coordinates, shape (dim_x, *shape)."""
        return np.stack(np.meshgrid(*([self.nodes] * self.dim_x), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_x, d=self.spacing)

    def wrap(self, index: int | np.ndarray) -> int | np.ndarray:
        return np.mod(index, self.n_x)


def integrate_v(g: np.ndarray, grid: VelocityGrid) -> np.ndarray | float:
    """Midpoint quadrature over the three trailing velocity axes."""
    out = np.sum(g, axis=VEL_AXES) * grid.weight
    return float(out) if np.ndim(out) == 0 else out


def integrate_xv(g: np.ndarray, sgrid: SpatialGrid, vgrid: VelocityGrid) -> float:
    """Uniform periodic quadrature in x times midpoint quadrature in v."""
    if g.shape != sgrid.shape + vgrid.shape:
        raise ValueError(f"expected shape {sgrid.shape + vgrid.shape}, got {g.shape}")
    return float(np.sum(g) * sgrid.cell_volume * vgrid.weight)


def integrate_x(a: np.ndarray, sgrid: SpatialGrid) -> np.ndarray | float:
    axes = tuple(range(sgrid.dim_x))
    out = np.sum(a, axis=axes) * sgrid.cell_volume
    return float(out) if np.ndim(out) == 0 else out


def spectral_derivative(a: np.ndarray, sgrid: SpatialGrid, axis: int = 0, order: int = 1) -> np.ndarray:
    """Fourier derivative along spatial ``axis`` (an index into the leading axes of ``a``)."""
    if order == 0:
        return np.array(a, copy=True)
    k = sgrid.wavenumbers
    shape = [1] * a.ndim
    shape[axis] = sgrid.n_x
    mult = (1j * k.reshape(shape)) ** order
    if order % 2 == 1 and sgrid.n_x % 2 == 0:
        # Nyquist mode has no consistent odd derivative on a real grid.
        nyq = [slice(None)] * a.ndim
        nyq[axis] = sgrid.n_x // 2
        mult = np.array(np.broadcast_to(mult, tuple(shape)), copy=True)
        mult[tuple(nyq)] = 0.0
    return np.real(np.fft.ifft(np.fft.fft(a, axis=axis) * mult, axis=axis))


def drop_nyquist(a: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    """Remove the Nyquist mode along every spatial axis of an even grid.

    Odd spectral derivatives vanish there, so no field can balance content in
    that mode; constraint residuals are measured on the remaining modes.
    """
    if sgrid.n_x % 2:
        return np.array(a, copy=True)
    axes = tuple(range(sgrid.dim_x))
    ah = np.fft.fftn(a, axes=axes)
    for ax in axes:
        idx = [slice(None)] * a.ndim
        idx[ax] = sgrid.n_x // 2
        ah[tuple(idx)] = 0.0
    return np.real(np.fft.ifftn(ah, axes=axes))
