"""Periodic grid, wavenumber lattices, transforms and Fourier multipliers.

The domain is the rectangle [-pi*lx, pi*lx) x [-pi*ly, pi*ly), periodic in
both directions, sampled on nx x ny equispaced nodes with nx, ny powers of
two.  Arrays are indexed u[ix, iy] (x along axis 0).  Wavenumbers follow
standard DFT ordering, kx_m = m/lx for m = 0, 1, ..., nx/2-1, -nx/2, ..., -1,
so that d/dx acts as multiplication by i*kx on the coefficients.

Conventions:
  * forward transform is the plain unnormalized DFT, the inverse carries
    the 1/(nx*ny) factor (numpy convention);
  * odd-order derivative multipliers have their Nyquist entry zeroed, which
    keeps the derivative of a real field real;
  * the antiderivative d/dx^{-1} is the regularized multiplier
    -i/(kx + i*lam*delta) with delta = 2^-52.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

#: Regularization of the 1/kx singularity; one double-precision ulp at 1.
INV_DX_DELTA = 2.0**-52


def _fft_workers() -> int:
    try:
        return max(1, int(os.environ.get("KPDS_FFT_WORKERS", "1")))
    except ValueError:
        return 1


def fft2(u: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2D DFT (the internal transform provider)."""
    return scipy.fft.fft2(u, workers=_fft_workers())


def ifft2(v: np.ndarray) -> np.ndarray:
    """Inverse 2D DFT carrying the 1/(nx*ny) normalization."""
    return scipy.fft.ifft2(v, workers=_fft_workers())


def rfft2(u: np.ndarray) -> np.ndarray:
    """Real-input forward DFT, half-spectrum along the last axis."""
    return scipy.fft.rfft2(u, workers=_fft_workers())


def irfft2(v: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    return scipy.fft.irfft2(v, s=shape, workers=_fft_workers())


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2D:
    """Doubly periodic rectangle with power-of-two mode counts.

    Periods are 2*pi*lx and 2*pi*ly; nodes x_j = -pi*lx + j*(2*pi*lx/nx).
    """

    nx: int
    ny: int
    lx: float = 5.0
    ly: float = 5.0

    def __post_init__(self):
        if not (_is_power_of_two(self.nx) and _is_power_of_two(self.ny)):
            raise ValueError(f"mode counts must be powers of two, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("lx, ly must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @cached_property
    def x(self) -> np.ndarray:
        return -np.pi * self.lx + (2 * np.pi * self.lx / self.nx) * np.arange(self.nx)

    @cached_property
    def y(self) -> np.ndarray:
        return -np.pi * self.ly + (2 * np.pi * self.ly / self.ny) * np.arange(self.ny)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical node coordinates X, Y of shape (nx, ny)."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def kx(self) -> np.ndarray:
        """x-wavenumbers m/lx in DFT ordering, shape (nx,)."""
        return np.fft.fftfreq(self.nx, d=1.0 / self.nx) / self.lx

    @cached_property
    def ky(self) -> np.ndarray:
        return np.fft.fftfreq(self.ny, d=1.0 / self.ny) / self.ly

    @cached_property
    def kx2d(self) -> np.ndarray:
        return np.broadcast_to(self.kx[:, None], self.shape)

    @cached_property
    def ky2d(self) -> np.ndarray:
        return np.broadcast_to(self.ky[None, :], self.shape)

    @cached_property
    def phase(self) -> np.ndarray:
        """(-1)^(mx+my) table aligning the raw DFT with the physical kernel.

        The nodes start at -pi*l, so the coefficient of e^{i k x} picks up
        e^{-i k x_0} = (-1)^m relative to the index-based DFT.  The table is
        its own inverse.
        """
        sx = np.where(np.arange(self.nx) % 2 == 0, 1.0, -1.0)
        sy = np.where(np.arange(self.ny) % 2 == 0, 1.0, -1.0)
        return np.outer(sx, sy)

    @property
    def cell_area(self) -> float:
        return (2 * np.pi * self.lx / self.nx) * (2 * np.pi * self.ly / self.ny)

    @property
    def area(self) -> float:
        return (2 * np.pi * self.lx) * (2 * np.pi * self.ly)


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a field on a Grid2D, the state marched in time."""

    grid: Grid2D
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def to_physical(self) -> np.ndarray:
        return inverse_transform(self)

    def hermitian_defect(self) -> float:
        """Max deviation from coeffs(-k) = conj(coeffs(k)), relative to max|coeffs|.

        Zero (to rounding) for fields whose physical-space values are real.
        """
        c = self.coeffs
        mirrored = np.conj(c[np.ix_(-np.arange(self.grid.nx) % self.grid.nx,
                                    -np.arange(self.grid.ny) % self.grid.ny)])
        scale = np.max(np.abs(c))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(c - mirrored)) / scale)


@dataclass(frozen=True)
class MultiplierTable:
    """Per-mode complex factors implementing a Fourier multiplier."""

    values: np.ndarray
    description: str = ""

    def __mul__(self, other):
        v = other.values if isinstance(other, MultiplierTable) else other
        return MultiplierTable(self.values * v, self.description)


def forward_transform(u: np.ndarray, grid: Grid2D) -> SpectralField:
    """Coefficients of u against e^{-i kx x - i ky y}; inverse round-trips.

    Equals the unnormalized DFT times the grid phase, so a pure harmonic
    cos(kx x) lands on the +/-kx entries with value +nx*ny/2.
    """
    u = np.asarray(u)
    if u.shape != grid.shape:
        raise ValueError(f"lattice shape {u.shape} does not match grid {grid.shape}")
    return SpectralField(grid, grid.phase * fft2(u))


def inverse_transform(v: SpectralField) -> np.ndarray:
    return ifft2(v.grid.phase * v.coeffs)


def multiplier_dx(grid: Grid2D) -> MultiplierTable:
    """d/dx as i*kx, Nyquist column zeroed (odd-order derivative rule)."""
    kx = grid.kx.copy()
    kx[grid.nx // 2] = 0.0
    return MultiplierTable(np.broadcast_to(1j * kx[:, None], grid.shape).copy(), "d/dx")


def multiplier_dy(grid: Grid2D) -> MultiplierTable:
    ky = grid.ky.copy()
    ky[grid.ny // 2] = 0.0
    return MultiplierTable(np.broadcast_to(1j * ky[None, :], grid.shape).copy(), "d/dy")


def multiplier_inv_dx(grid: Grid2D, lam: float) -> MultiplierTable:
    """Antiderivative d/dx^{-1} as -i/(kx + i*lam*delta).

    The imaginary shift removes the kx = 0 singularity; for kx != 0 the entry
    deviates from -i/kx by at most delta/kx^2 in modulus.
    """
    denom = grid.kx2d + 1j * (lam * INV_DX_DELTA)
    return MultiplierTable(-1j / denom, "inv-dx")


def quadrature(u: np.ndarray, grid: Grid2D) -> float:
    """Integral of u over the periodic rectangle by the mode-exact rectangle rule."""
    u = np.asarray(u)
    if u.shape != grid.shape:
        raise ValueError(f"lattice shape {u.shape} does not match grid {grid.shape}")
    return float(np.real(np.sum(u))) * grid.cell_area
