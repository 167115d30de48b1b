"""Analytic KP solutions used as initial data and as time-t ground truth.

Two oracles:

  * the Zaitsev traveling wave of KP I, localized in x and periodic in y,

        u(xi, y) = 2 a^2 (1 - b cosh(a xi) cos(d y))
                   / (cosh(a xi) - b cos(d y))^2,
        xi = x - c t,  c = a^2 (4 - b^2)/(1 - b^2),
        d = a^2 sqrt(3/(1 - b^2));

  * the doubly periodic genus-2 solution of KP II, u = 2 (ln theta)_xx
    with the Riemann theta series

        theta(phi1, phi2) = sum_m exp(m^T B m / 2 + i m^T phi),
        phi_j = mu_j x + nu_j y + omega_j t + phi_j0,

    over a symmetric negative-definite 2x2 matrix B = [[b, b*l], [b*l,
    b*l^2 + d]].  Derivatives of theta are taken term by term; numeric
    differentiation of ln theta is kept in the tests as an oracle only.

Both solutions solve the evolutionary KP equation with eps = 1; the
`evolution_residual` helper measures how well a sampled solution satisfies
the discretized right-hand side, which pins down sign conventions
empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from kpds.grid import Grid2D, forward_transform, quadrature
from kpds.models import ModelSpec, linear_symbol, make_nonlinear


@dataclass(frozen=True)
class ZaitsevParams:
    alpha: float = 1.0
    beta: float = 0.5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")

    @property
    def speed(self) -> float:
        return self.alpha**2 * (4.0 - self.beta**2) / (1.0 - self.beta**2)

    @property
    def delta(self) -> float:
        return math.sqrt(3.0 / (1.0 - self.beta**2)) * self.alpha**2

    @property
    def y_period(self) -> float:
        return 2.0 * math.pi / self.delta


def zaitsev(x, y, t: float, p: ZaitsevParams) -> np.ndarray:
    """Zaitsev KP I traveling wave at time t (x, y broadcast together)."""
    xi = np.asarray(x, dtype=float) - p.speed * t
    C = np.cosh(p.alpha * xi)
    co = np.cos(p.delta * np.asarray(y, dtype=float))
    return 2.0 * p.alpha**2 * (1.0 - p.beta * C * co) / (C - p.beta * co) ** 2


def zaitsev_dx(x, y, t: float, p: ZaitsevParams) -> np.ndarray:
    """Analytic x-derivative; u_t = -speed * u_x for the traveling form."""
    xi = np.asarray(x, dtype=float) - p.speed * t
    C = np.cosh(p.alpha * xi)
    S = np.sinh(p.alpha * xi)
    co = np.cos(p.delta * np.asarray(y, dtype=float))
    num = p.beta * co * C + (p.beta * co) ** 2 - 2.0
    return 2.0 * p.alpha**3 * S * num / (C - p.beta * co) ** 3


def zaitsev_dt(x, y, t: float, p: ZaitsevParams) -> np.ndarray:
    return -p.speed * zaitsev_dx(x, y, t, p)


def zaitsev_periodized(x, y, t: float, p: ZaitsevParams, x_period: float,
                       images: int = 2, derivative: str = "") -> np.ndarray:
    """Sum of x-translates of the wave, smooth-periodic on the given period.

    Sampling the bare closed form leaves an O(e^{-alpha*pi*lx}) derivative
    seam at the domain edge that dominates spectral residuals; the image sum
    removes it.  The periodized field fails the PDE only through nonlinear
    cross terms of order e^{-alpha*x_period}, far below rounding on the
    domains used here.  derivative selects "", "dx" or "dt".
    """
    fn = {"": zaitsev, "dx": zaitsev_dx, "dt": zaitsev_dt}[derivative]
    x = np.asarray(x, dtype=float)
    total = fn(x, y, t, p)
    for n in range(1, images + 1):
        total = total + fn(x + n * x_period, y, t, p)
        total = total + fn(x - n * x_period, y, t, p)
    return total


@dataclass(frozen=True)
class ThetaParams:
    """Riemann matrix entries, phase wave vectors and series truncation."""

    b: float
    lam: float
    d: float
    mu: tuple[float, float]
    nu: tuple[float, float]
    omega: tuple[float, float]
    phase0: tuple[float, float] = (0.0, 0.0)
    trunc: int = 8

    def __post_init__(self):
        eigs = np.linalg.eigvalsh(self.riemann_matrix)
        if not np.all(eigs < 0.0):
            raise ValueError(
                f"Riemann matrix must be negative definite, eigenvalues {eigs}"
            )

    @property
    def riemann_matrix(self) -> np.ndarray:
        return np.array([
            [self.b, self.b * self.lam],
            [self.b * self.lam, self.b * self.lam**2 + self.d],
        ])

    @property
    def x_speed(self) -> float:
        """Propagation speed in x when mu1 = mu2 and omega1 = omega2."""
        if not (self.mu[0] == self.mu[1] and self.omega[0] == self.omega[1]):
            raise ValueError("pure x-translation requires mu1 = mu2, omega1 = omega2")
        return -self.omega[0] / self.mu[0]


def theta_params_kp2(trunc: int = 8) -> ThetaParams:
    """Parameter set of the benchmark doubly periodic KP II solution.

    Two conventions are fixed empirically by the residual test:

      * b = -1: the series only converges for negative-definite B, and with
        the (2,2) entry pinned at -1 this is the unique sign choice;
      * the transverse wavenumber 0.25269207053125 is stated in the
        integrable normalization carrying a factor 3 on the u_yy term, so it
        is scaled by sqrt(3) here, where that coefficient is 1 (a least
        squares fit of the evolution residual against candidate transverse
        coefficients returns 3.000000 for the unscaled value).

    With these choices the sampled solution satisfies the discrete KP II
    right-hand side to ~1e-10 on a 256x256 commensurate grid.
    """
    b = -1.0
    lam = 0.15
    d = -1.0 - b * lam**2
    nu1 = math.sqrt(3.0) * 0.25269207053125
    om = -1.5429032317052
    return ThetaParams(b=b, lam=lam, d=d, mu=(0.25, 0.25), nu=(nu1, -nu1),
                       omega=(om, om), phase0=(0.0, 0.0), trunc=trunc)


def _theta_truncation(p: ThetaParams) -> int:
    """Smallest half-width M with boundary-shell terms < 1e-16 of the sum."""
    B = p.riemann_matrix
    M = max(2, p.trunc)
    while M < 64:
        m = np.arange(-M, M + 1)
        m1, m2 = np.meshgrid(m, m, indexing="ij")
        amp = np.exp(0.5 * (B[0, 0] * m1**2 + 2 * B[0, 1] * m1 * m2 + B[1, 1] * m2**2))
        boundary = np.max(amp[(np.abs(m1) == M) | (np.abs(m2) == M)])
        if boundary < 1e-16 * np.sum(amp):
            return M
        M += 2
    raise ValueError("theta series truncation did not stabilize; check B")


def theta_tables(p: ThetaParams, x_orders=(0,), t_orders=(0,)):
    """Series data for theta and its term-wise derivatives.

    Returns (m1, m2, amp, factors) with factors[(kx, kt)] the per-term
    multiplier (i m.mu)^kx (i m.omega)^kt; evaluation contracts these against
    complex exponentials of the phases.
    """
    M = _theta_truncation(p)
    m = np.arange(-M, M + 1)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    B = p.riemann_matrix
    amp = np.exp(0.5 * (B[0, 0] * m1**2 + 2 * B[0, 1] * m1 * m2 + B[1, 1] * m2**2))
    mdotmu = p.mu[0] * m1 + p.mu[1] * m2
    mdotom = p.omega[0] * m1 + p.omega[1] * m2
    factors = {}
    for kx in x_orders:
        for kt in t_orders:
            factors[(kx, kt)] = (1j * mdotmu) ** kx * (1j * mdotom) ** kt
    return m1, m2, amp, factors


def _theta_eval(p: ThetaParams, phi1: np.ndarray, phi2: np.ndarray,
                orders: tuple[tuple[int, int], ...]) -> list[np.ndarray]:
    """Evaluate theta derivatives at the given phases for each (kx, kt)."""
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    shape = np.broadcast_shapes(phi1.shape, phi2.shape)
    f1 = np.broadcast_to(phi1, shape).ravel()
    f2 = np.broadcast_to(phi2, shape).ravel()
    xs = sorted({kx for kx, _ in orders})
    ts = sorted({kt for _, kt in orders})
    m1, m2, amp, factors = theta_tables(p, x_orders=xs, t_orders=ts)
    mm = m1[:, 0]
    E1 = np.exp(1j * np.outer(mm, f1))
    E2 = np.exp(1j * np.outer(mm, f2))
    out = []
    for kx, kt in orders:
        W = amp * factors[(kx, kt)]
        out.append(np.einsum("mp,mp->p", E1, W @ E2).real.reshape(shape))
    return out


def theta(phi1, phi2, p: ThetaParams) -> np.ndarray:
    """Riemann theta series at phases (phi1, phi2); real by m -> -m symmetry."""
    return _theta_eval(p, phi1, phi2, ((0, 0),))[0]


def _phases(x, y, t: float, p: ThetaParams):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    phi1 = p.mu[0] * x + p.nu[0] * y + p.omega[0] * t + p.phase0[0]
    phi2 = p.mu[1] * x + p.nu[1] * y + p.omega[1] * t + p.phase0[1]
    return phi1, phi2


def kp2_doubly_periodic(x, y, t: float, p: ThetaParams) -> np.ndarray:
    """u = 2 (ln theta)_xx with term-wise theta derivatives."""
    phi1, phi2 = _phases(x, y, t, p)
    th, thx, thxx = _theta_eval(p, phi1, phi2, ((0, 0), (1, 0), (2, 0)))
    if np.min(np.abs(th)) <= 1e-12:
        raise ValueError("theta vanishes near an evaluation point")
    return 2.0 * (th * thxx - thx**2) / th**2


def kp2_doubly_periodic_dx(x, y, t: float, p: ThetaParams) -> np.ndarray:
    """u_x = 2 (ln theta)_xxx, the oracle companion of the traveling form."""
    phi1, phi2 = _phases(x, y, t, p)
    th, thx, thxx, thxxx = _theta_eval(
        p, phi1, phi2, ((0, 0), (1, 0), (2, 0), (3, 0))
    )
    return 2.0 * (thxxx / th - 3.0 * thxx * thx / th**2 + 2.0 * thx**3 / th**3)


def kp2_doubly_periodic_dt(x, y, t: float, p: ThetaParams) -> np.ndarray:
    return -p.x_speed * kp2_doubly_periodic_dx(x, y, t, p)


def theta_kp2_grid(nx: int = 256, ny: int = 256, p: ThetaParams | None = None) -> Grid2D:
    """Grid commensurate with the solution periods: one period per direction.

    With mu1 = mu2 = mu the x-period is 2 pi / mu; with nu1 = -nu2 = nu the
    y-period is 2 pi / nu.
    """
    p = p or theta_params_kp2()
    if p.mu[0] != p.mu[1] or p.nu[0] != -p.nu[1]:
        raise ValueError("commensurate grid assumes mu1 = mu2 and nu1 = -nu2")
    return Grid2D(nx=nx, ny=ny, lx=1.0 / p.mu[0], ly=1.0 / abs(p.nu[0]))


def evolution_residual(u: np.ndarray, u_t: np.ndarray, model: ModelSpec,
                       grid: Grid2D) -> float:
    """|| u_t - (L u + N(u)) ||_2 / ||u||_2 with the discretized right side."""
    v = forward_transform(u, grid)
    L = linear_symbol(model, grid).values
    rhs = L * v.coeffs + make_nonlinear(model, grid)(v.coeffs)
    res = forward_transform(u_t, grid).coeffs - rhs
    scale = grid.cell_area / (grid.nx * grid.ny)
    num = math.sqrt(scale * float(np.sum(np.abs(res) ** 2)))
    den = math.sqrt(quadrature(np.abs(u) ** 2, grid))
    return num / den
