"""PDE definitions as the pair (L, N) of v_t = L v + N(v), plus split flows.

Two equation families on the doubly periodic rectangle:

  KP (real u, lambda = -1 focusing KP I, +1 defocusing KP II), in
  evolutionary form

      u_t + 6 u u_x + eps^2 u_xxx = -lambda dx^{-1} u_yy,

  with dx^{-1} the regularized antiderivative multiplier.  The divergence
  structure forces the constraint that u_yy has zero x-mean; initial data
  are taken as x-derivatives so the kx = 0 coefficients vanish.

  DS II (complex u, rho = -1 focusing, +1 defocusing):

      i*eps u_t + eps^2 (u_xx - u_yy) + 2 rho (Phi + |u|^2) u = 0,
      Phi_xx + Phi_yy + 2 (|u|^2)_xx = 0,

  where the mean field Phi is eliminated in Fourier space through
  Phi = -2 F^{-1}[ kx^2/(kx^2+ky^2) F[|u|^2] ].

All linear symbols are purely imaginary by construction, and the 1/(i*eps)
prefactor of the DS nonlinearity is absorbed into N so every stepper sees
the same autonomous generic form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from kpds.grid import (
    INV_DX_DELTA,
    Grid2D,
    MultiplierTable,
    SpectralField,
    fft2,
    ifft2,
    irfft2,
    rfft2,
)

EQUATIONS = ("kp1", "kp2", "ds2")

#: Global existence threshold (1/8)*((sqrt(5)-1)/2)^2 for the focusing
#: DS II smallness condition in the form 1/(eps^2 * eta) <= threshold.
SUNG_THRESHOLD = 0.125 * ((math.sqrt(5.0) - 1.0) / 2.0) ** 2


@dataclass(frozen=True)
class ModelSpec:
    """Which PDE is solved and its parameters.

    epsilon is the dispersion (semiclassical) parameter; lam = +-1 selects
    KP II/KP I; rho = +-1 selects defocusing/focusing DS II; eta is the
    anisotropy of the Gaussian DS initial data.
    """

    equation: str
    epsilon: float = 1.0
    lam: int = 1
    rho: int = 1
    eta: float = 1.0

    def __post_init__(self):
        if self.equation not in EQUATIONS:
            raise ValueError(f"equation must be one of {EQUATIONS}")
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError("epsilon must lie in (0, 1]")
        if self.equation in ("kp1", "kp2"):
            expected = -1 if self.equation == "kp1" else 1
            if self.lam != expected:
                raise ValueError(f"{self.equation} requires lam = {expected}")
        if self.equation == "ds2":
            if self.rho not in (-1, 1):
                raise ValueError("rho must be +-1")
            if not self.eta > 0:
                raise ValueError("eta must be positive")

    @property
    def is_kp(self) -> bool:
        return self.equation in ("kp1", "kp2")

    @classmethod
    def kp1(cls, epsilon: float = 1.0) -> "ModelSpec":
        return cls(equation="kp1", epsilon=epsilon, lam=-1)

    @classmethod
    def kp2(cls, epsilon: float = 1.0) -> "ModelSpec":
        return cls(equation="kp2", epsilon=epsilon, lam=1)

    @classmethod
    def ds2(cls, epsilon: float = 1.0, rho: int = 1, eta: float = 1.0) -> "ModelSpec":
        return cls(equation="ds2", epsilon=epsilon, rho=rho, eta=eta)


@dataclass(frozen=True)
class StateDS:
    """DS II state: complex amplitude plus its mean field on demand."""

    u: SpectralField

    @property
    def phi_field(self) -> np.ndarray:
        return mean_field(self.u, self.u.grid)


def _kx_odd(grid: Grid2D) -> np.ndarray:
    """x-wavenumbers with the Nyquist entry zeroed (odd-derivative rule)."""
    kx = grid.kx.copy()
    kx[grid.nx // 2] = 0.0
    return kx


def linear_symbol(model: ModelSpec, grid: Grid2D) -> MultiplierTable:
    """Diagonal symbol of the stiff linear part; purely imaginary entries.

    KP:   L = i*(eps^2 kx^3 - lambda ky^2 * kx/(kx^2 + delta^2)), the second
          factor being the imaginary part of the regularized antiderivative;
          entries on the kx Nyquist column are zero, so constraint modes
          (kx = 0) do not evolve linearly at all.
    DS2:  L = i*eps*(ky^2 - kx^2).
    """
    if model.is_kp:
        kx = _kx_odd(grid)[:, None]
        ky2 = (grid.ky**2)[None, :]
        reg = kx / (kx**2 + INV_DX_DELTA**2)
        sym = 1j * (model.epsilon**2 * kx**3 - model.lam * ky2 * reg)
        return MultiplierTable(np.broadcast_to(sym, grid.shape).copy(), "L-kp")
    sym = 1j * model.epsilon * (grid.ky2d**2 - grid.kx2d**2)
    return MultiplierTable(sym.astype(complex), "L-ds2")


def make_kp_nonlinear(model: ModelSpec, grid: Grid2D) -> Callable:
    """Nonlinear map N(v) = -3 i kx F[u^2] of the KP advection term -6 u u_x."""
    ikx_phase = grid.phase * (1j * _kx_odd(grid)[:, None])
    phase = grid.phase

    def nonlinear(v: np.ndarray, t: float = 0.0) -> np.ndarray:
        u = ifft2(phase * v)
        return ikx_phase * fft2(-3.0 * u * u)

    return nonlinear


def nonlinear_kp(v: SpectralField, model: ModelSpec, grid: Grid2D) -> SpectralField:
    return SpectralField(grid, make_kp_nonlinear(model, grid)(v.coeffs))


def mean_field_quotient(grid: Grid2D) -> np.ndarray:
    """kx^2/(kx^2+ky^2) with the (0,0) entry set to zero (zero-mean gauge)."""
    kx2 = grid.kx2d**2
    k2 = kx2 + grid.ky2d**2
    with np.errstate(invalid="ignore", divide="ignore"):
        quot = np.where(k2 > 0.0, kx2 / np.where(k2 > 0.0, k2, 1.0), 0.0)
    return quot


def phi_from_intensity(w: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Elliptic solve Phi = -2 F^{-1}[kx^2/(kx^2+ky^2) F[w]] for real w.

    Grid phases cancel in the multiplier sandwich and the input is real, so
    the half-spectrum transform pair applies directly.
    """
    quot = mean_field_quotient(grid)[:, : grid.ny // 2 + 1]
    return -2.0 * irfft2(quot * rfft2(w), grid.shape)


def mean_field(v: SpectralField, grid: Grid2D) -> np.ndarray:
    """Mean field Phi of a DS state; real, depends on |u|^2 only."""
    u = ifft2(grid.phase * v.coeffs)
    return phi_from_intensity(np.abs(u) ** 2, grid)


def make_ds_nonlinear(model: ModelSpec, grid: Grid2D) -> Callable:
    """N(v) = (2 i rho / eps) F[(Phi + |u|^2) u]; 1/(i eps) folded in."""
    quot_half = mean_field_quotient(grid)[:, : grid.ny // 2 + 1]
    shape = grid.shape
    phase = grid.phase
    factor_phase = (2j * model.rho / model.epsilon) * grid.phase

    def nonlinear(v: np.ndarray, t: float = 0.0) -> np.ndarray:
        u = ifft2(phase * v)
        w = u.real**2 + u.imag**2
        phi = -2.0 * irfft2(quot_half * rfft2(w), shape)
        return factor_phase * fft2((phi + w) * u)

    return nonlinear


def nonlinear_ds(v: SpectralField, model: ModelSpec, grid: Grid2D) -> SpectralField:
    return SpectralField(grid, make_ds_nonlinear(model, grid)(v.coeffs))


def make_nonlinear(model: ModelSpec, grid: Grid2D) -> Callable:
    if model.is_kp:
        return make_kp_nonlinear(model, grid)
    return make_ds_nonlinear(model, grid)


def ds_split_linear_flow(v: np.ndarray, h: float, model: ModelSpec,
                         grid: Grid2D) -> np.ndarray:
    """Exact flow of the linear split equation, v <- e^{L h} v (any real h)."""
    L = linear_symbol(model, grid).values
    return np.exp(h * L) * v


def ds_split_nonlinear_flow(u: np.ndarray, h: float, model: ModelSpec,
                            grid: Grid2D) -> np.ndarray:
    """Exact flow of the nonlinear split equation in physical space.

    |u|^2 (hence Phi) is constant along this flow, so the solution is the
    pointwise unimodular phase u * exp((2 i rho/eps)(Phi + |u|^2) h).
    """
    w = np.abs(u) ** 2
    phi = phi_from_intensity(w, grid)
    return u * np.exp((2j * model.rho / model.epsilon) * (phi + w) * h)


def initial_data_kp(grid: Grid2D) -> np.ndarray:
    """u0 = -d/dx sech^2(R), R = sqrt(x^2+y^2): localized, constraint-clean.

    Evaluates to 2 sech^2(R) tanh(R) x/R, with value 0 on the axis R = 0.
    The x-derivative structure makes the kx = 0 Fourier coefficients vanish
    to rounding, which is the discrete form of the zero-x-mean constraint.
    """
    X, Y = grid.mesh
    R = np.hypot(X, Y)
    ratio = np.divide(X, R, out=np.zeros_like(X), where=R > 0)
    return 2.0 * np.cosh(R) ** -2 * np.tanh(R) * ratio


def initial_data_ds(grid: Grid2D, eta: float) -> np.ndarray:
    """Gaussian u0 = exp(-(x^2 + eta y^2)) used for the semiclassical runs."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    X, Y = grid.mesh
    return np.exp(-(X**2 + eta * Y**2))


def check_constraint(v: SpectralField) -> float:
    """Max over ky of |coeffs(kx=0, ky)|, the zero-x-mean violation measure."""
    return float(np.max(np.abs(v.coeffs[0, :])))


def sung_condition(epsilon: float, eta: float) -> tuple[float, bool]:
    """Smallness ratio 1/(eps^2 eta) and whether it meets the global-existence
    threshold for focusing DS II Gaussian data (boundary inclusive)."""
    value = 1.0 / (epsilon**2 * eta)
    return value, value <= SUNG_THRESHOLD


def sung_ratio(model: ModelSpec) -> tuple[float, bool]:
    return sung_condition(model.epsilon, model.eta)
