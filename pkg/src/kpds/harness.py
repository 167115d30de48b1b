"""Convergence benchmarks: presets, reference solutions, sweeps, reports.

A preset bundles one experiment: the model, grid, horizon, the time-step
ladder, the reference policy and the scheme list.  `run_convergence` builds
the reference once, runs every (scheme, nt) leg, measures the normalized L2
error against the reference at the final time together with the mass drift
and wall-clock time, and fits log10(error) = -a log10(nt) + b per scheme.

Reference policies mirror the benchmarked experiments: an exact solution
sampled at the final time, a single high-resolution run of one scheme, or
the arithmetic mean of several schemes' high-resolution runs (whose
pairwise spread is recorded as the trust floor of the reference).
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from kpds.diagnostics import MassObserver, error_norm
from kpds.exact import (
    ThetaParams,
    ZaitsevParams,
    kp2_doubly_periodic,
    zaitsev_periodized,
)
from kpds.grid import Grid2D, SpectralField, forward_transform
from kpds.integrators import (
    BlowUpError,
    NoConvergenceError,
    StepperConfig,
    evolve,
)
from kpds.models import ModelSpec, initial_data_ds, initial_data_kp


@dataclass(frozen=True)
class ExactReference:
    """Closed-form solution sampled on the grid at the final time."""


@dataclass(frozen=True)
class SingleSchemeReference:
    scheme: str
    nt_ref: int


@dataclass(frozen=True)
class MeanOfSchemesReference:
    schemes: tuple[str, ...]
    nt_ref: int


@dataclass(frozen=True)
class FitWindow:
    """Bounds restricting which (nt, delta2) pairs enter a slope fit."""

    nt_min: int | None = None
    nt_max: int | None = None
    delta_min: float | None = None
    delta_max: float | None = None

    def contains(self, nt: int, delta: float) -> bool:
        if not math.isfinite(delta) or delta <= 0.0:
            return False
        if self.nt_min is not None and nt < self.nt_min:
            return False
        if self.nt_max is not None and nt > self.nt_max:
            return False
        if self.delta_min is not None and delta < self.delta_min:
            return False
        if self.delta_max is not None and delta > self.delta_max:
            return False
        return True


@dataclass(frozen=True)
class ExperimentPreset:
    """One benchmark experiment; see kpds.presets for the registry."""

    name: str
    model: ModelSpec
    grid: Grid2D
    t_max: float
    nt_list: tuple[int, ...]
    reference: ExactReference | SingleSchemeReference | MeanOfSchemesReference
    schemes: tuple[str, ...]
    problem: str  # zaitsev | theta | kp-sech | ds-gaussian
    zaitsev: ZaitsevParams | None = None
    zaitsev_x0: float = 0.0
    theta: ThetaParams | None = None
    dcrk_tau: float = 1.0
    fit_window: FitWindow = FitWindow()
    description: str = ""

    def __post_init__(self):
        nts = self.nt_list
        if any(b <= a for a, b in zip(nts, nts[1:])):
            raise ValueError("nt_list must be strictly increasing")
        nt_ref = getattr(self.reference, "nt_ref", None)
        if nt_ref is not None and nt_ref <= 2 * max(nts):
            raise ValueError("nt_ref must exceed twice the largest nt")

    def stepper_config(self) -> StepperConfig:
        return StepperConfig(dcrk_tau=self.dcrk_tau)


def sample_exact(preset: ExperimentPreset, t: float) -> np.ndarray:
    """Physical-space closed-form solution of the preset at time t."""
    g = preset.grid
    X, Y = g.mesh
    if preset.problem == "zaitsev":
        return zaitsev_periodized(X - preset.zaitsev_x0, Y, t, preset.zaitsev,
                                  x_period=2 * np.pi * g.lx)
    if preset.problem == "theta":
        return kp2_doubly_periodic(X, Y, t, preset.theta)
    raise ValueError(f"preset {preset.name!r} has no closed-form solution")


def initial_state(preset: ExperimentPreset) -> SpectralField:
    g = preset.grid
    if preset.problem in ("zaitsev", "theta"):
        u0 = sample_exact(preset, 0.0)
    elif preset.problem == "kp-sech":
        u0 = initial_data_kp(g)
    elif preset.problem == "ds-gaussian":
        u0 = initial_data_ds(g, preset.model.eta).astype(complex)
    else:
        raise ValueError(f"unknown problem kind {preset.problem!r}")
    return forward_transform(u0, g)


@dataclass
class LegResult:
    scheme: str
    nt: int
    delta2: float
    cpu_seconds: float
    mass_test_final: float
    iters_mean: float = math.nan
    flag: str = "ok"


@dataclass
class SchemeFit:
    scheme: str
    slope: float
    intercept: float
    n_points: int
    non_decreasing_pairs: list[tuple[int, int]] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return not self.non_decreasing_pairs


@dataclass
class ConvergenceReport:
    preset_name: str
    rows: list[LegResult]
    fit_window: FitWindow = FitWindow()
    reference_floor: float | None = None

    def scheme_rows(self, scheme: str) -> list[LegResult]:
        return [r for r in self.rows if r.scheme == scheme]

    def fits(self) -> dict[str, SchemeFit]:
        out = {}
        for scheme in dict.fromkeys(r.scheme for r in self.rows):
            rows = self.scheme_rows(scheme)
            pts = [(r.nt, r.delta2) for r in rows
                   if self.fit_window.contains(r.nt, r.delta2)]
            finite = [(r.nt, r.delta2) for r in rows if math.isfinite(r.delta2)]
            pairs = [(a[0], b[0]) for a, b in zip(finite, finite[1:])
                     if b[1] >= a[1]]
            if len(pts) >= 3:
                slope, intercept = fit_slope(pts)
            else:
                slope, intercept = math.nan, math.nan
            out[scheme] = SchemeFit(scheme=scheme, slope=slope,
                                    intercept=intercept, n_points=len(pts),
                                    non_decreasing_pairs=pairs)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("scheme,nt,delta2,cpu_seconds,mass_test_final,iters_mean,flag\n")
        for r in self.rows:
            buf.write(f"{r.scheme},{r.nt},{r.delta2!r},{r.cpu_seconds!r},"
                      f"{r.mass_test_final!r},{r.iters_mean!r},{r.flag}\n")
        return buf.getvalue()


def parse_report_csv(text: str, preset_name: str = "",
                     fit_window: FitWindow = FitWindow()) -> ConvergenceReport:
    lines = [ln for ln in text.strip().split("\n") if ln]
    header = lines[0].split(",")
    want = ["scheme", "nt", "delta2", "cpu_seconds", "mass_test_final",
            "iters_mean", "flag"]
    if header != want:
        raise ValueError(f"unexpected report header {header}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append(LegResult(scheme=parts[0], nt=int(parts[1]),
                              delta2=float(parts[2]), cpu_seconds=float(parts[3]),
                              mass_test_final=float(parts[4]),
                              iters_mean=float(parts[5]), flag=parts[6]))
    return ConvergenceReport(preset_name=preset_name, rows=rows,
                             fit_window=fit_window)


def fit_slope(points, window: FitWindow | None = None) -> tuple[float, float]:
    """Least squares for log10(delta) = -a log10(nt) + b; returns (a, b)."""
    if window is not None:
        points = [(nt, d) for nt, d in points if window.contains(nt, d)]
    points = [(nt, d) for nt, d in points if math.isfinite(d) and d > 0]
    if len(points) < 2:
        raise ValueError("insufficient data for a slope fit (need >= 2 points)")
    x = np.log10([float(nt) for nt, _ in points])
    y = np.log10([d for _, d in points])
    coef = np.polyfit(x, y, 1)
    return float(-coef[0]), float(coef[1])


def _run_reference_leg(preset: ExperimentPreset, scheme: str, nt: int,
                       v0: SpectralField) -> SpectralField:
    res = evolve(v0, preset.model, preset.grid, scheme, nt, preset.t_max,
                 config=preset.stepper_config())
    return res.field


def build_reference(preset: ExperimentPreset) -> tuple[SpectralField, float | None]:
    """Reference state at t_max plus the trust floor for mean-of policies."""
    ref = preset.reference
    if isinstance(ref, ExactReference):
        u = sample_exact(preset, preset.t_max)
        return forward_transform(u, preset.grid), None
    v0 = initial_state(preset)
    if isinstance(ref, SingleSchemeReference):
        return _run_reference_leg(preset, ref.scheme, ref.nt_ref, v0), None
    if isinstance(ref, MeanOfSchemesReference):
        members = []
        for scheme in ref.schemes:
            try:
                members.append(_run_reference_leg(preset, scheme, ref.nt_ref, v0))
            except (BlowUpError, NoConvergenceError) as exc:
                raise RuntimeError(
                    f"reference member {scheme} failed for preset "
                    f"{preset.name}: {exc}"
                ) from exc
        mean = SpectralField(preset.grid,
                             sum(m.coeffs for m in members) / len(members))
        floor = 0.0
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                floor = max(floor, error_norm(members[i], members[j], v0))
        return mean, floor
    raise TypeError(f"unknown reference policy {ref!r}")


def run_leg(preset: ExperimentPreset, scheme: str, nt: int,
            reference: SpectralField, v0: SpectralField) -> LegResult:
    obs = MassObserver(preset.grid, stride=nt)
    try:
        res = evolve(v0, preset.model, preset.grid, scheme, nt, preset.t_max,
                     observers=(obs,), config=preset.stepper_config())
    except BlowUpError:
        return LegResult(scheme=scheme, nt=nt, delta2=math.nan,
                         cpu_seconds=math.nan, mass_test_final=math.nan,
                         flag="diverged")
    except NoConvergenceError:
        return LegResult(scheme=scheme, nt=nt, delta2=math.nan,
                         cpu_seconds=math.nan, mass_test_final=math.nan,
                         flag="no-convergence")
    delta2 = error_norm(res.field, reference, v0)
    iters = res.mean_iterations
    return LegResult(scheme=scheme, nt=nt, delta2=delta2,
                     cpu_seconds=res.cpu_seconds,
                     mass_test_final=obs.trace.test_values[-1],
                     iters_mean=math.nan if iters is None else iters)


def _leg_task(args):
    preset, scheme, nt, reference, v0 = args
    return run_leg(preset, scheme, nt, reference, v0)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("KPDS_WORKERS", "1")))
    except ValueError:
        return 1


def run_convergence(preset: ExperimentPreset,
                    workers: int | None = None) -> ConvergenceReport:
    """Run every (scheme, nt) leg of the preset against one shared reference.

    Legs may run in parallel processes (workers > 1); results are ordered by
    (scheme, nt) regardless of completion order.  A failed reference aborts
    the preset; failed legs are flagged in place.
    """
    workers = default_workers() if workers is None else workers
    reference, floor = build_reference(preset)
    v0 = initial_state(preset)
    legs = [(preset, scheme, nt, reference, v0)
            for scheme in preset.schemes for nt in preset.nt_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_leg_task, legs))
    else:
        results = [_leg_task(leg) for leg in legs]
    order = {scheme: i for i, scheme in enumerate(preset.schemes)}
    results.sort(key=lambda r: (order[r.scheme], r.nt))
    if floor is not None:
        for r in results:
            if r.flag == "ok" and math.isfinite(r.delta2) and r.delta2 < 10 * floor:
                r.flag = "floor-limited"
    return ConvergenceReport(preset_name=preset.name, rows=results,
                             fit_window=preset.fit_window,
                             reference_floor=floor)


def with_overrides(preset: ExperimentPreset, **kwargs) -> ExperimentPreset:
    """Functional update helper used by the CLI flag overrides."""
    return replace(preset, **kwargs)
