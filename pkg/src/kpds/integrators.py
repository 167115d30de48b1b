"""Time steppers for v' = L v + N(v, t) with diagonal L, plus the evolve loop.

Seven schemes behind the common contract step(v, t) -> v', all built on
per-mode coefficient tables assembled once per (scheme, L, h):

  ifrk4     Lawson integrating-factor RK4 in per-step shifted form, so only
            e^{Lh} and e^{Lh/2} ever appear (Lawson 1967).
  etd_cm    Cox-Matthews ETDRK4 (J. Comput. Phys. 176, 2002).
  etd_k     Krogstad ETDRK4-B (J. Comput. Phys. 203, 2005).
  etd_ho    Hochbruck-Ostermann five-stage stiff-order-four scheme (SIAM J.
            Numer. Anal. 43, 2005); a transcription self-test gates its use.
  dcrk      composite explicit/linearly-implicit RK: classical RK4 on modes
            with |h L| <= tau, an A-stable diagonally implicit third-order
            component on the rest, sharing stages and weights.
  irk4      two-stage Gauss (Hammer-Hollingsworth) solved by fixed-point
            iteration with the diagonal linear part inverted exactly.
  strang2 / yoshida4   operator splitting over two exactly integrable flows
            (DS only; Yoshida 1990 triple jump for order four).

All steppers accept any ndarray shape, so scalar model problems use the
same code paths as the PDE states.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from kpds.grid import Grid2D, SpectralField, fft2, ifft2, irfft2, rfft2
from kpds.models import ModelSpec, linear_symbol, make_nonlinear, mean_field_quotient
from kpds.phi import (
    DCRK_GAMMA,
    DCRK_Q,
    DCRK_S,
    GAUSS_A,
    GAUSS_C,
    YOSHIDA_W0,
    YOSHIDA_W1,
    SchemeCoeffs,
    build_coeffs,
)


class BlowUpError(RuntimeError):
    """State became non-finite (focusing blow-up or instability)."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state at step {step}, t = {t:.6g}")
        self.step = step
        self.t = t


class NoConvergenceError(RuntimeError):
    """Fixed-point stage iteration exceeded its iteration budget."""

    def __init__(self, iterations: int, last_delta: float):
        super().__init__(
            f"stage iteration did not converge within {iterations} iterations "
            f"(last delta {last_delta:.3e})"
        )
        self.iterations = iterations
        self.last_delta = last_delta


class UnsupportedSchemeError(ValueError):
    pass


@dataclass(frozen=True)
class StepperConfig:
    """Knobs shared by the stepper factory."""

    dcrk_tau: float = 1.0
    irk4_fp_tolerance: float = 1e-8
    irk4_max_iters: int = 100


class IFRK4Stepper:
    """Classical RK4 on the Lawson-transformed variable w = e^{-Lt} v.

    Written in shifted per-step form: stage values are propagated with
    e^{Lh/2}, never with the unbounded e^{Lt}.
    """

    def __init__(self, L: np.ndarray, nonlin: Callable, h: float):
        self.h = h
        self.nonlin = nonlin
        c = build_coeffs("ifrk4", L, h)
        self.e_full = c["exp_h"]
        self.e_half = c["exp_h2"]

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        h, e, e2, nl = self.h, self.e_full, self.e_half, self.nonlin
        n1 = nl(v, t)
        u2 = e2 * (v + 0.5 * h * n1)
        n2 = nl(u2, t + 0.5 * h)
        u3 = e2 * v + 0.5 * h * n2
        n3 = nl(u3, t + 0.5 * h)
        u4 = e * v + h * (e2 * n3)
        n4 = nl(u4, t + h)
        return e * v + (h / 6.0) * (e * n1 + 2.0 * e2 * (n2 + n3) + n4)


class ETDCoxMatthewsStepper:
    """Four-stage ETDRK4 with phi-function quadrature weights."""

    def __init__(self, L: np.ndarray, nonlin: Callable, h: float):
        self.h = h
        self.nonlin = nonlin
        c = build_coeffs("etd_cm", L, h)
        self.e_full, self.e_half = c["exp_h"], c["exp_h2"]
        self.p1_half = c["phi1_h2"]
        self.alpha, self.beta, self.gamma = c["alpha"], c["beta"], c["gamma"]

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        h, nl = self.h, self.nonlin
        e, e2, p = self.e_full, self.e_half, self.p1_half
        n1 = nl(v, t)
        a = e2 * v + 0.5 * h * p * n1
        na = nl(a, t + 0.5 * h)
        b = e2 * v + 0.5 * h * p * na
        nb = nl(b, t + 0.5 * h)
        cst = e2 * a + 0.5 * h * p * (2.0 * nb - n1)
        nc = nl(cst, t + h)
        return e * v + h * (self.alpha * n1 + 2.0 * self.beta * (na + nb)
                            + self.gamma * nc)


class ETDKrogstadStepper:
    """Krogstad's ETDRK4 variant with phi2-improved internal stages."""

    def __init__(self, L: np.ndarray, nonlin: Callable, h: float):
        self.h = h
        self.nonlin = nonlin
        c = build_coeffs("etd_k", L, h)
        self.e_full, self.e_half = c["exp_h"], c["exp_h2"]
        self.p1h, self.p2h = c["phi1_h2"], c["phi2_h2"]
        self.p1, self.p2, self.p3 = c["phi1_h"], c["phi2_h"], c["phi3_h"]

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        h, nl = self.h, self.nonlin
        e, e2 = self.e_full, self.e_half
        k1 = nl(v, t)
        u2 = e2 * v + 0.5 * h * self.p1h * k1
        k2 = nl(u2, t + 0.5 * h)
        u3 = e2 * v + 0.5 * h * self.p1h * k1 + h * self.p2h * (k2 - k1)
        k3 = nl(u3, t + 0.5 * h)
        u4 = e * v + h * self.p1 * k1 + 2.0 * h * self.p2 * (k3 - k1)
        k4 = nl(u4, t + h)
        return e * v + h * (self.p1 * k1
                            + self.p2 * (-3.0 * k1 + 2.0 * k2 + 2.0 * k3 - k4)
                            + 4.0 * self.p3 * (k1 - k2 - k3 + k4))


_HO_VALIDATED = False


def _validate_etd_ho() -> None:
    """Transcription gate: weight values at z = 0 and a scalar order check."""
    global _HO_VALIDATED
    if _HO_VALIDATED:
        return
    _HO_VALIDATED = True  # tentative: the probe below builds steppers itself
    try:
        _run_ho_checks()
    except BaseException:
        _HO_VALIDATED = False
        raise


def _run_ho_checks() -> None:
    c = build_coeffs("etd_ho", np.zeros(1, dtype=complex), 1.0)
    checks = {"b1": 1.0 / 6.0, "b4": 1.0 / 6.0, "b5": 2.0 / 3.0,
              "a51": 0.25, "a52": 0.125, "a54": 0.0}
    for name, want in checks.items():
        got = complex(c[name][0])
        if abs(got - want) > 1e-13:
            raise AssertionError(f"etd_ho coefficient {name} = {got}, expected {want}")
    # scalar order probe on v' = lam v + cos(t)
    lam = -2.0 + 0.0j
    exact = _forced_scalar_solution(lam, 1.0, 1.0)
    errs = []
    for nt in (16, 32, 64):
        h = 1.0 / nt
        s = ETDHochbruckOstermannStepper(np.array([lam]), _forced_scalar_nonlin(), h)
        v = np.array([1.0 + 0.0j])
        for k in range(nt):
            v = s.step(v, k * h)
        errs.append(abs(v[0] - exact))
    slopes = np.diff(np.log(errs)) / np.log(0.5)
    if not np.all((slopes > 3.5) & (slopes < 4.6)):
        raise AssertionError(f"etd_ho scalar order check failed, slopes {slopes}")


def _forced_scalar_nonlin() -> Callable:
    return lambda v, t: np.full_like(v, np.cos(t))


def _forced_scalar_solution(lam: complex, v0: complex, t: float) -> complex:
    """Closed form of v' = lam v + cos(t), v(0) = v0."""
    a = 0.5 / (1j - lam)
    b = 0.5 / (-1j - lam)
    c = v0 - a - b
    return c * np.exp(lam * t) + a * np.exp(1j * t) + b * np.exp(-1j * t)


class ETDHochbruckOstermannStepper:
    """Five-stage ETD scheme retaining order four under stiffness."""

    def __init__(self, L: np.ndarray, nonlin: Callable, h: float):
        _validate_etd_ho()
        self.h = h
        self.nonlin = nonlin
        c = build_coeffs("etd_ho", L, h)
        self.c = c
        self.e_full, self.e_half = c["exp_h"], c["exp_h2"]

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        h, nl, c = self.h, self.nonlin, self.c
        e, e2 = self.e_full, self.e_half
        p1h, p2h = c["phi1_h2"], c["phi2_h2"]
        p1, p2 = c["phi1_h"], c["phi2_h"]
        n1 = nl(v, t)
        u2 = e2 * v + 0.5 * h * p1h * n1
        n2 = nl(u2, t + 0.5 * h)
        u3 = e2 * v + h * ((0.5 * p1h - p2h) * n1 + p2h * n2)
        n3 = nl(u3, t + 0.5 * h)
        u4 = e * v + h * ((p1 - 2.0 * p2) * n1 + p2 * (n2 + n3))
        n4 = nl(u4, t + h)
        u5 = e2 * v + h * (c["a51"] * n1 + c["a52"] * (n2 + n3) + c["a54"] * n4)
        n5 = nl(u5, t + 0.5 * h)
        return e * v + h * (c["b1"] * n1 + c["b4"] * n4 + c["b5"] * n5)


class CompositeStepper:
    """Explicit RK4 on slow modes composed with an implicit RK3 on fast ones.

    A mode is fast iff |h L| > tau.  Slow modes and the whole nonlinearity
    go through classical RK4; the fast diagonal linear part is advanced by
    an A-stable diagonally implicit third-order component sharing the RK4
    stage abscissae and weights, so each stage costs one elementwise solve.
    With no fast modes every stage reduces to classical RK4 arithmetic.
    """

    def __init__(self, L: np.ndarray, nonlin: Callable, h: float, tau: float = 1.0):
        self.h = h
        self.nonlin = nonlin
        c = build_coeffs("dcrk", L, h, dcrk_tau=tau)
        self.L_slow = c["L_slow"]
        self.L_fast = c["L_fast"]
        self.solve = c["stage_solve"]
        self.fast_fraction = float(np.mean(c["fast_mask"]))
        # implicit off-diagonal entries (diagonal DCRK_GAMMA throughout)
        self.ihat21 = 0.5 - DCRK_GAMMA
        self.ihat31 = 0.5 - DCRK_GAMMA - DCRK_S
        self.ihat32 = DCRK_S
        self.ihat41 = 1.0 - DCRK_GAMMA - 2.0 * DCRK_Q
        self.ihat42 = self.ihat43 = DCRK_Q

    def _slow(self, v: np.ndarray, t: float) -> np.ndarray:
        return self.nonlin(v, t) + self.L_slow * v

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        h = self.h
        lf, solve = self.L_fast, self.solve
        s1 = self._slow(v, t)
        f1 = lf * v
        u2 = solve * (v + h * (0.5 * s1 + self.ihat21 * f1))
        f2 = lf * u2
        s2 = self._slow(u2, t + 0.5 * h)
        u3 = solve * (v + h * (0.5 * s2 + self.ihat31 * f1 + self.ihat32 * f2))
        f3 = lf * u3
        s3 = self._slow(u3, t + 0.5 * h)
        u4 = solve * (v + h * (s3 + self.ihat41 * f1 + self.ihat42 * f2
                               + self.ihat43 * f3))
        f4 = lf * u4
        s4 = self._slow(u4, t + h)
        return v + (h / 6.0) * ((s1 + f1) + 2.0 * (s2 + f2) + 2.0 * (s3 + f3)
                                + (s4 + f4))


class GaussIRK4Stepper:
    """Two-stage Gauss collocation solved by preconditioned fixed point.

    The stage system U = v + h A (L U + N(U)) is iterated as
    U <- Minv (v + h A N(U)) with M = I - h A (x) L inverted exactly per
    mode, so only the nonlinearity is relaxed.  Stops when the max-norm
    difference of consecutive stage iterates falls below the tolerance,
    measured relative to the state's own max-norm so the rule is insensitive
    to the DFT scaling of the coefficients (for O(1) scalar states this is
    the literal absolute rule).  New stages are predicted by evaluating the
    previous step's collocation polynomial at the new stage times, which is
    what keeps the per-step iteration count low on smooth trajectories.
    """

    # Lagrange weights extrapolating values at nodes (0, c1, c2) of the
    # previous step to the new stage times 1 + c1 and 1 + c2
    _P = None

    @classmethod
    def _predictor_weights(cls) -> np.ndarray:
        if cls._P is None:
            nodes = np.array([0.0, GAUSS_C[0], GAUSS_C[1]])
            weights = np.empty((2, 3))
            for i, tau in enumerate(1.0 + GAUSS_C):
                for j in range(3):
                    others = [nodes[m] for m in range(3) if m != j]
                    weights[i, j] = np.prod([(tau - x) / (nodes[j] - x)
                                             for x in others])
            cls._P = weights
        return cls._P

    def __init__(self, L: np.ndarray, nonlin: Callable, h: float,
                 fp_tolerance: float = 1e-8, max_iters: int = 100):
        self.h = h
        self.nonlin = nonlin
        self.fp_tolerance = fp_tolerance
        self.max_iters = max_iters
        c = build_coeffs("irk4", L, h)
        self.inv = (c["inv11"], c["inv12"], c["inv21"], c["inv22"])
        self.L = np.asarray(L, dtype=complex)
        self.last_iterations = 0
        self._warm: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def step(self, v: np.ndarray, t: float) -> np.ndarray:
        h, nl = self.h, self.nonlin
        i11, i12, i21, i22 = self.inv
        a = GAUSS_A
        t1, t2 = t + GAUSS_C[0] * h, t + GAUSS_C[1] * h
        if self._warm is None:
            u1, u2 = v.copy(), v.copy()
        else:
            P = self._predictor_weights()
            v_prev, u1_prev, u2_prev = self._warm
            u1 = P[0, 0] * v_prev + P[0, 1] * u1_prev + P[0, 2] * u2_prev
            u2 = P[1, 0] * v_prev + P[1, 1] * u1_prev + P[1, 2] * u2_prev
        scale = max(1.0, float(np.max(np.abs(v))))
        n1 = nl(u1, t1)
        n2 = nl(u2, t2)
        delta = np.inf
        for iteration in range(1, self.max_iters + 1):
            b1 = v + h * (a[0, 0] * n1 + a[0, 1] * n2)
            b2 = v + h * (a[1, 0] * n1 + a[1, 1] * n2)
            u1_new = i11 * b1 + i12 * b2
            u2_new = i21 * b1 + i22 * b2
            delta = max(float(np.max(np.abs(u1_new - u1))),
                        float(np.max(np.abs(u2_new - u2)))) / scale
            u1, u2 = u1_new, u2_new
            if delta < self.fp_tolerance:
                self.last_iterations = iteration
                break
            n1 = nl(u1, t1)
            n2 = nl(u2, t2)
        else:
            raise NoConvergenceError(self.max_iters, delta)
        self._warm = (v, u1, u2)
        return v + 0.5 * h * (self.L * (u1 + u2) + n1 + n2)

    def stage_residual(self, v: np.ndarray, t: float) -> float:
        """Max-norm defect of the converged stage system, re-evaluated from
        scratch and reported on the same state-relative scale as the
        stopping rule."""
        h, nl = self.h, self.nonlin
        a = GAUSS_A
        i11, i12, i21, i22 = self.inv
        t1, t2 = t + GAUSS_C[0] * h, t + GAUSS_C[1] * h
        scale = max(1.0, float(np.max(np.abs(v))))
        u1 = v.copy()
        u2 = v.copy()
        for _ in range(self.max_iters):
            n1 = nl(u1, t1)
            n2 = nl(u2, t2)
            b1 = v + h * (a[0, 0] * n1 + a[0, 1] * n2)
            b2 = v + h * (a[1, 0] * n1 + a[1, 1] * n2)
            u1_new = i11 * b1 + i12 * b2
            u2_new = i21 * b1 + i22 * b2
            delta = max(float(np.max(np.abs(u1_new - u1))),
                        float(np.max(np.abs(u2_new - u2)))) / scale
            u1, u2 = u1_new, u2_new
            if delta < self.fp_tolerance:
                break
        f1 = self.L * u1 + nl(u1, t1)
        f2 = self.L * u2 + nl(u2, t2)
        r1 = u1 - v - h * (a[0, 0] * f1 + a[0, 1] * f2)
        r2 = u2 - v - h * (a[1, 0] * f1 + a[1, 1] * f2)
        return max(float(np.max(np.abs(r1))),
                   float(np.max(np.abs(r2)))) / scale


class SplitStepper:
    """Strang or Yoshida composition of two exactly integrable flows.

    flow_a and flow_b map (state, dt) -> state for any real dt; the
    fourth-order triple jump takes one negative intermediate sub-step,
    which both exact flows support.
    """

    def __init__(self, flow_a: Callable, flow_b: Callable, h: float, order: int = 2):
        if order not in (2, 4):
            raise ValueError("split order must be 2 or 4")
        self.h = h
        self.order = order
        self.flow_a = flow_a
        self.flow_b = flow_b
        if order == 2:
            self._program = [("a", 0.5 * h), ("b", h), ("a", 0.5 * h)]
        else:
            w1, w0 = YOSHIDA_W1, YOSHIDA_W0
            self._program = [
                ("a", 0.5 * w1 * h), ("b", w1 * h),
                ("a", 0.5 * (w1 + w0) * h), ("b", w0 * h),
                ("a", 0.5 * (w0 + w1) * h), ("b", w1 * h),
                ("a", 0.5 * w1 * h),
            ]

    def step(self, state, t: float):
        for which, dt in self._program:
            flow = self.flow_a if which == "a" else self.flow_b
            state = flow(state, dt)
        return state


class DSSplitStepper(SplitStepper):
    """Splitting for DS II: exact linear flow in Fourier space, exact
    unimodular nonlinear flow in physical space."""

    def __init__(self, model: ModelSpec, grid: Grid2D, h: float, order: int = 2):
        if model.equation != "ds2":
            raise UnsupportedSchemeError("splitting schemes support DS II only")
        L = linear_symbol(model, grid).values
        quot_half = mean_field_quotient(grid)[:, : grid.ny // 2 + 1]
        shape = grid.shape
        phase = grid.phase
        factor = 2j * model.rho / model.epsilon
        exp_cache: dict[float, np.ndarray] = {}

        def flow_a(v, dt):
            tab = exp_cache.get(dt)
            if tab is None:
                tab = np.exp(dt * L)
                exp_cache[dt] = tab
            return tab * v

        def flow_b(v, dt):
            u = ifft2(phase * v)
            w = u.real**2 + u.imag**2
            phi = -2.0 * irfft2(quot_half * rfft2(w), shape)
            return phase * fft2(u * np.exp((factor * dt) * (phi + w)))

        super().__init__(flow_a, flow_b, h, order)


_STEPPERS = {
    "ifrk4": IFRK4Stepper,
    "etd_cm": ETDCoxMatthewsStepper,
    "etd_k": ETDKrogstadStepper,
    "etd_ho": ETDHochbruckOstermannStepper,
}


def make_stepper(scheme: str, model: ModelSpec, grid: Grid2D, h: float,
                 config: StepperConfig = StepperConfig()):
    """Build a ready-to-run stepper (coefficient tables included) for a PDE."""
    if scheme in ("strang2", "yoshida4"):
        return DSSplitStepper(model, grid, h, order=2 if scheme == "strang2" else 4)
    L = linear_symbol(model, grid).values
    nonlin = make_nonlinear(model, grid)
    if scheme in _STEPPERS:
        return _STEPPERS[scheme](L, nonlin, h)
    if scheme == "dcrk":
        return CompositeStepper(L, nonlin, h, tau=config.dcrk_tau)
    if scheme == "irk4":
        return GaussIRK4Stepper(L, nonlin, h, fp_tolerance=config.irk4_fp_tolerance,
                                max_iters=config.irk4_max_iters)
    raise UnsupportedSchemeError(f"unknown scheme {scheme!r}")


@dataclass
class EvolveResult:
    field: SpectralField
    cpu_seconds: float
    steps: int
    iterations: list[int] = field(default_factory=list)

    @property
    def mean_iterations(self) -> float | None:
        return float(np.mean(self.iterations)) if self.iterations else None


def evolve(v0: SpectralField, model: ModelSpec, grid: Grid2D, scheme: str,
           nt: int, t_max: float, observers: Sequence = (),
           config: StepperConfig = StepperConfig()) -> EvolveResult:
    """March nt equal steps to t_max, with per-step blow-up detection.

    Observers are objects with an integer `stride` and a call signature
    (step_index, t, coeffs); an optional start(t0, coeffs) hook fires before
    the first step.  Wall-clock time covers the stepping loop only, not the
    coefficient build.
    """
    if nt < 1:
        raise ValueError("nt must be at least 1")
    h = t_max / nt
    stepper = make_stepper(scheme, model, grid, h, config)
    track_iters = isinstance(stepper, GaussIRK4Stepper)
    v = v0.coeffs.copy()
    for obs in observers:
        start = getattr(obs, "start", None)
        if start is not None:
            start(0.0, v)
    iterations: list[int] = []
    t_begin = time.perf_counter()
    for k in range(1, nt + 1):
        v = stepper.step(v, (k - 1) * h)
        if not np.all(np.isfinite(v)):
            raise BlowUpError(step=k, t=k * h)
        if track_iters:
            iterations.append(stepper.last_iterations)
        for obs in observers:
            if k % obs.stride == 0:
                obs(k, k * h, v)
    cpu = time.perf_counter() - t_begin
    return EvolveResult(field=SpectralField(grid, v), cpu_seconds=cpu,
                        steps=nt, iterations=iterations)
