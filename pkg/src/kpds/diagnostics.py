"""Conserved-quantity traces, error norms and spectral resolution reports.

The only quantity traced during benchmark runs is the L2 mass
m(t) = int |u|^2 dxdy, reported as the relative drift m(t)/m(0) - 1.  The
KP and DS energy functionals are implemented as optional diagnostics but
stay out of every acceptance gate: they involve the antiderivative
multiplier, whose evaluation is itself numerically delicate, so their
drift can indicate problems the actual solution does not have.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from kpds.grid import (
    Grid2D,
    SpectralField,
    ifft2,
    multiplier_dx,
    multiplier_dy,
    multiplier_inv_dx,
    quadrature,
)
from kpds.models import ModelSpec, mean_field


def _phys(grid: Grid2D, coeffs: np.ndarray) -> np.ndarray:
    return ifft2(grid.phase * coeffs)


def mass(v: SpectralField) -> float:
    """L2 mass via Parseval, evaluated on the evolved representation."""
    g = v.grid
    return g.cell_area / (g.nx * g.ny) * float(np.sum(np.abs(v.coeffs) ** 2))


def energy_kp(v: SpectralField, model: ModelSpec, grid: Grid2D) -> float:
    """(1/2) int (u_x)^2 - lam (dx^-1 u_y)^2 - 2 eps^2 u^3."""
    u = _phys(grid, v.coeffs).real
    ux = _phys(grid, multiplier_dx(grid).values * v.coeffs).real
    anti = multiplier_inv_dx(grid, model.lam).values * multiplier_dy(grid).values
    w = _phys(grid, anti * v.coeffs).real
    integrand = ux**2 - model.lam * w**2 - 2.0 * model.epsilon**2 * u**3
    return 0.5 * quadrature(integrand, grid)


def energy_ds(v: SpectralField, model: ModelSpec, grid: Grid2D) -> float:
    """(1/2) int eps^2 |u_x|^2 - eps^2 |u_y|^2
    - rho (|u|^4 - (Phi^2 + (dx^-1 Phi_y)^2)/2)."""
    u = _phys(grid, v.coeffs)
    ux = _phys(grid, multiplier_dx(grid).values * v.coeffs)
    uy = _phys(grid, multiplier_dy(grid).values * v.coeffs)
    phi = mean_field(v, grid)
    from kpds.grid import fft2  # local import keeps module deps one-way

    anti = multiplier_inv_dx(grid, 1.0).values * multiplier_dy(grid).values
    phi_anti = ifft2(anti * fft2(phi)).real
    e2 = model.epsilon**2
    integrand = (e2 * np.abs(ux) ** 2 - e2 * np.abs(uy) ** 2
                 - model.rho * (np.abs(u) ** 4 - 0.5 * (phi**2 + phi_anti**2)))
    return 0.5 * quadrature(integrand, grid)


def error_norm(v_num: SpectralField, v_ref: SpectralField,
               v0: SpectralField) -> float:
    """L2 norm of the difference over the L2 norm of the initial data."""
    g = v_num.grid
    diff = _phys(g, v_num.coeffs) - _phys(g, v_ref.coeffs)
    num = np.sqrt(quadrature(np.abs(diff) ** 2, g))
    den = np.sqrt(quadrature(np.abs(_phys(g, v0.coeffs)) ** 2, g))
    return float(num / den)


@dataclass
class MassTrace:
    """Relative mass drift m(t)/m(0) - 1 sampled along a run."""

    times: list[float] = field(default_factory=list)
    test_values: list[float] = field(default_factory=list)
    m0: float = 0.0

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("t,test\n")
        for t, val in zip(self.times, self.test_values):
            out.write(f"{t!r},{val!r}\n")
        return out.getvalue()


class MassObserver:
    """Observer recording the mass drift every `stride` steps."""

    def __init__(self, grid: Grid2D, stride: int = 1):
        self.grid = grid
        self.stride = stride
        self.trace = MassTrace()

    def _mass(self, coeffs: np.ndarray) -> float:
        g = self.grid
        return g.cell_area / (g.nx * g.ny) * float(np.sum(np.abs(coeffs) ** 2))

    def start(self, t0: float, coeffs: np.ndarray) -> None:
        self.trace.m0 = self._mass(coeffs)
        self.trace.times.append(t0)
        self.trace.test_values.append(0.0)

    def __call__(self, k: int, t: float, coeffs: np.ndarray) -> None:
        self.trace.times.append(t)
        self.trace.test_values.append(self._mass(coeffs) / self.trace.m0 - 1.0)


@dataclass(frozen=True)
class SpectrumProfile:
    """Max modulus of the coefficients per |kx| and per |ky| index shell."""

    shells_x: np.ndarray
    max_x: np.ndarray
    shells_y: np.ndarray
    max_y: np.ndarray

    def log10_max_x(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(self.max_x)

    def log10_max_y(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(self.max_y)

    def resolved(self, floor: float = 1e-10) -> bool:
        """Tail (highest shells short of exact Nyquist) below floor * peak.

        The exact Nyquist shell is excluded: odd-derivative multipliers zero
        it, so it can sit at 0 even on an under-resolved grid.
        """
        peak = max(self.max_x.max(), self.max_y.max())
        if peak == 0.0:
            return True
        tail_x = self.max_x[-2]
        tail_y = self.max_y[-2]
        return bool(tail_x <= floor * peak and tail_y <= floor * peak)

    def to_csv(self) -> dict[str, str]:
        out = {}
        for name, shells, vals in (("kx", self.shells_x, self.log10_max_x()),
                                   ("ky", self.shells_y, self.log10_max_y())):
            buf = io.StringIO()
            buf.write("shell_k,log10_max\n")
            for s, v in zip(shells, vals):
                buf.write(f"{int(s)},{v!r}\n")
            out[name] = buf.getvalue()
        return out


def spectrum_profile(v: SpectralField) -> SpectrumProfile:
    g = v.grid
    a = np.abs(v.coeffs)
    mx = np.abs(np.fft.fftfreq(g.nx, d=1.0 / g.nx).astype(int))
    my = np.abs(np.fft.fftfreq(g.ny, d=1.0 / g.ny).astype(int))
    shells_x = np.arange(g.nx // 2 + 1)
    shells_y = np.arange(g.ny // 2 + 1)
    max_x = np.zeros(shells_x.size)
    max_y = np.zeros(shells_y.size)
    np.maximum.at(max_x, mx, a.max(axis=1))
    np.maximum.at(max_y, my, a.max(axis=0))
    return SpectrumProfile(shells_x=shells_x, max_x=max_x,
                           shells_y=shells_y, max_y=max_y)
