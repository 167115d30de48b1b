"""Pseudospectral solvers and time-integrator benchmarks for KP and DS II.

The package solves the Kadomtsev-Petviashvili equations (KP I/II) and the
hyperbolic-elliptic Davey-Stewartson system (DS II) on doubly periodic
domains with a Fourier collocation discretization, and benchmarks seven
time-stepping schemes of up to fourth order against exact and reference
solutions: Lawson integrating factor, three exponential time-differencing
variants (Cox-Matthews, Krogstad, Hochbruck-Ostermann), a composite
explicit/linearly-implicit Runge-Kutta, the two-stage Gauss implicit
Runge-Kutta, and Strang/Yoshida operator splitting (DS only).
"""

from kpds.grid import Grid2D, SpectralField
from kpds.models import ModelSpec

__all__ = ["Grid2D", "SpectralField", "ModelSpec"]
__version__ = "0.1.0"
