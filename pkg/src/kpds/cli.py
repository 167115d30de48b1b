"""Command-line interface: single runs, convergence sweeps, self-tests.

Subcommands

  run            one simulation; writes SPF1 snapshots, a mass-trace CSV and
                 final-time spectrum CSVs into --out-dir
  converge       run a preset sweep (optionally overridden by flags); writes
                 the convergence report CSV and prints fitted slopes
  phi-selftest   cross-validate the two phi evaluation paths
  exact-selftest closed-form oracle residual checks
  list-presets   registry listing

Flags may come from a JSON config file (--config) mirroring the flag names;
explicit flags win.  KPDS_WORKERS sets the sweep worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from kpds import diagnostics, presets
from kpds.exact import (
    ZaitsevParams,
    evolution_residual,
    kp2_doubly_periodic,
    kp2_doubly_periodic_dt,
    theta_kp2_grid,
    theta_params_kp2,
    zaitsev_periodized,
)
from kpds.grid import Grid2D, SpectralField, inverse_transform
from kpds.harness import (
    ExactReference,
    ExperimentPreset,
    MeanOfSchemesReference,
    SingleSchemeReference,
    default_workers,
    initial_state,
    run_convergence,
    with_overrides,
)
from kpds.integrators import evolve
from kpds.models import ModelSpec
from kpds.phi import contour_eval, phi_eval
from kpds.spf import write_spf1

EQUATION_CHOICES = ("kp1", "kp2", "ds2-foc", "ds2-def")


def _model_from_flag(equation: str, epsilon: float, eta: float) -> ModelSpec:
    if equation == "kp1":
        return ModelSpec.kp1(epsilon=epsilon)
    if equation == "kp2":
        return ModelSpec.kp2(epsilon=epsilon)
    rho = -1 if equation == "ds2-foc" else 1
    return ModelSpec.ds2(epsilon=epsilon, rho=rho, eta=eta)


def _parse_reference(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "exact":
        return ExactReference()
    if kind == "single":
        scheme, _, nt = rest.partition(":")
        return SingleSchemeReference(scheme=scheme, nt_ref=int(nt))
    if kind == "mean":
        schemes, _, nt = rest.partition(":")
        return MeanOfSchemesReference(schemes=tuple(schemes.split("+")),
                                      nt_ref=int(nt))
    raise ValueError(
        f"bad --reference {spec!r}; use exact, single:SCHEME:NT or "
        "mean:S1+S2+S3:NT"
    )


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file mirroring flag names")
    p.add_argument("--seed-preset", help="start from a named preset")
    p.add_argument("--paper-scale", action="store_true",
                   help="full-scale grids (long runtimes)")
    p.add_argument("--equation", choices=EQUATION_CHOICES)
    p.add_argument("--scheme")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--lx", type=float)
    p.add_argument("--ly", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--nt", type=int)
    p.add_argument("--nt-list", help="comma-separated step counts")
    p.add_argument("--reference",
                   help="exact | single:SCHEME:NT | mean:S1+S2:NT")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--snapshot-stride", type=int)
    p.add_argument("--dcrk-tau", type=float)


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    table = json.loads(args.config.read_text())
    for key, value in table.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise SystemExit(f"config key {key!r} does not match any flag")
        if getattr(args, attr) in (None, False):
            setattr(args, attr, value)
    return args


def _build_preset(args: argparse.Namespace) -> ExperimentPreset:
    if args.seed_preset:
        preset = presets.get_preset(args.seed_preset,
                                    paper_scale=args.paper_scale)
    else:
        if not args.equation:
            raise SystemExit("either --seed-preset or --equation is required")
        model = _model_from_flag(args.equation, args.epsilon or 0.1,
                                 args.eta or 1.0)
        base = "ds-gaussian" if model.equation == "ds2" else "kp-sech"
        preset = ExperimentPreset(
            name=f"custom-{args.equation}",
            model=model,
            grid=Grid2D(nx=args.nx or 256, ny=args.ny or 256,
                        lx=args.lx or 5.0, ly=args.ly or 5.0),
            t_max=args.tmax or 0.4,
            nt_list=(100, 200, 400),
            reference=SingleSchemeReference("etd_ho", 1000),
            schemes=("ifrk4", "etd_cm"),
            problem=base,
        )
    overrides = {}
    grid_changes = {k: v for k, v in
                    (("nx", args.nx), ("ny", args.ny),
                     ("lx", args.lx), ("ly", args.ly)) if v is not None}
    if grid_changes and args.seed_preset:
        g = preset.grid
        overrides["grid"] = Grid2D(nx=grid_changes.get("nx", g.nx),
                                   ny=grid_changes.get("ny", g.ny),
                                   lx=grid_changes.get("lx", g.lx),
                                   ly=grid_changes.get("ly", g.ly))
    if args.equation and args.seed_preset:
        overrides["model"] = _model_from_flag(
            args.equation,
            args.epsilon if args.epsilon is not None else preset.model.epsilon,
            args.eta if args.eta is not None else preset.model.eta)
    elif args.epsilon is not None or args.eta is not None:
        m = preset.model
        overrides["model"] = ModelSpec(
            equation=m.equation,
            epsilon=args.epsilon if args.epsilon is not None else m.epsilon,
            lam=m.lam, rho=m.rho,
            eta=args.eta if args.eta is not None else m.eta)
    if args.tmax is not None:
        overrides["t_max"] = args.tmax
    if args.nt_list:
        overrides["nt_list"] = tuple(int(s) for s in args.nt_list.split(","))
    if args.scheme:
        overrides["schemes"] = tuple(args.scheme.split(","))
    if args.reference:
        overrides["reference"] = _parse_reference(args.reference)
    if args.dcrk_tau is not None:
        overrides["dcrk_tau"] = args.dcrk_tau
    return with_overrides(preset, **overrides) if overrides else preset


def cmd_list_presets(_args) -> int:
    for name in sorted(presets.PRESETS):
        p = presets.get_preset(name)
        print(f"{name:16s} {p.model.equation:4s} eps={p.model.epsilon:<5g} "
              f"grid={p.grid.nx}x{p.grid.ny}  t<={p.t_max:g}  {p.description}")
    return 0


def cmd_phi_selftest(_args) -> int:
    rng = np.random.default_rng(1234)
    zs = list(1j * rng.uniform(-1e3, 1e3, size=200))
    radius = 0.5 * np.sqrt(rng.uniform(0.0, 1.0, size=200))
    angle = rng.uniform(0.0, 2 * np.pi, size=200)
    zs += list(radius * np.exp(1j * angle))
    worst = 0.0
    for z in zs:
        direct = phi_eval(complex(z)).phis()
        contour = contour_eval(complex(z)).phis()
        worst = max(worst, float(np.max(np.abs(direct - contour)
                                        / (1.0 + np.abs(direct)))))
    print(f"phi two-path max deviation over {len(zs)} samples: {worst:.3e}")
    return 0 if worst <= 5e-15 else 1


def cmd_exact_selftest(_args) -> int:
    failures = 0

    zp = ZaitsevParams(alpha=1.0, beta=0.5)
    g = Grid2D(nx=256, ny=256, lx=5.0, ly=5.0)
    X, Y = g.mesh
    per = 2 * np.pi * g.lx
    u = zaitsev_periodized(X, Y, 0.0, zp, per)
    ut = zaitsev_periodized(X, Y, 0.0, zp, per, derivative="dt")
    res = evolution_residual(u, ut, ModelSpec.kp1(epsilon=1.0), g)
    ok = res <= 1e-6
    failures += not ok
    print(f"zaitsev residual 2^8x2^8: {res:.3e}  [{'ok' if ok else 'FAIL'}]")

    tp = theta_params_kp2()
    gt = theta_kp2_grid(256, 256, tp)
    Xt, Yt = gt.mesh
    u = kp2_doubly_periodic(Xt, Yt, 0.0, tp)
    ut = kp2_doubly_periodic_dt(Xt, Yt, 0.0, tp)
    res = evolution_residual(u, ut, ModelSpec.kp2(epsilon=1.0), gt)
    ok = res <= 1e-6
    failures += not ok
    print(f"theta residual 2^8x2^8:   {res:.3e}  [{'ok' if ok else 'FAIL'}]")

    from kpds.grid import forward_transform

    t1 = 1.0
    u0 = kp2_doubly_periodic(Xt, Yt, 0.0, tp)
    u1 = kp2_doubly_periodic(Xt, Yt, t1, tp)
    v0 = forward_transform(u0, gt)
    shifted = SpectralField(gt, np.exp(-1j * gt.kx2d * tp.x_speed * t1) * v0.coeffs)
    err = (np.linalg.norm(u1 - inverse_transform(shifted).real)
           / np.linalg.norm(u0))
    ok = err <= 5e-8
    failures += not ok
    print(f"theta phase-shift check:  {err:.3e}  [{'ok' if ok else 'FAIL'}]")
    return 1 if failures else 0


def cmd_run(args) -> int:
    preset = _build_preset(args)
    if args.nt is None:
        raise SystemExit("run requires --nt")
    scheme = (args.scheme or preset.schemes[0]).split(",")[0]
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    grid, model = preset.grid, preset.model
    v0 = initial_state(preset)
    stride = args.snapshot_stride or args.nt

    class SnapshotObserver:
        def __init__(self, stride):
            self.stride = stride

        def __call__(self, k, t, coeffs):
            u = inverse_transform(SpectralField(grid, coeffs))
            if model.is_kp:
                u = u.real
            write_spf1(out / f"snapshot_{k:06d}.spf1", u, grid, t)

    mass_obs = diagnostics.MassObserver(grid, stride=max(1, args.nt // 50))
    snap = SnapshotObserver(stride)
    result = evolve(v0, model, grid, scheme, args.nt, preset.t_max,
                    observers=(mass_obs, snap),
                    config=preset.stepper_config())
    (out / "mass_trace.csv").write_text(mass_obs.trace.to_csv())
    profile = diagnostics.spectrum_profile(result.field)
    for direction, text in profile.to_csv().items():
        (out / f"spectrum_{direction}.csv").write_text(text)
    print(f"ran {preset.name} scheme={scheme} nt={args.nt} "
          f"t_max={preset.t_max:g} cpu={result.cpu_seconds:.2f}s "
          f"mass_drift={mass_obs.trace.test_values[-1]:.3e} "
          f"resolved={profile.resolved()}")
    return 0


def cmd_converge(args) -> int:
    preset = _build_preset(args)
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    report = run_convergence(preset, workers=default_workers())
    path = out / f"convergence_{preset.name}.csv"
    path.write_text(report.to_csv())
    print(f"# preset {preset.name}  grid {preset.grid.nx}x{preset.grid.ny}  "
          f"t_max {preset.t_max:g}")
    if report.reference_floor is not None:
        print(f"# reference trust floor {report.reference_floor:.3e}")
    for scheme, fit in report.fits().items():
        flagged = "" if fit.converged else "  [non-decreasing legs]"
        print(f"{scheme:10s} slope a = {fit.slope:6.3f}  intercept b = "
              f"{fit.intercept:7.3f}  points = {fit.n_points}{flagged}")
    print(f"report written to {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kpds",
        description="Fourth-order time-stepping benchmarks for KP and DS II",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one simulation with snapshots")
    _add_common_flags(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_conv = sub.add_parser("converge", help="convergence sweep over nt")
    _add_common_flags(p_conv)
    p_conv.set_defaults(fn=cmd_converge)

    p_phi = sub.add_parser("phi-selftest", help="phi evaluation cross-check")
    p_phi.set_defaults(fn=cmd_phi_selftest)

    p_exact = sub.add_parser("exact-selftest", help="oracle residual checks")
    p_exact.set_defaults(fn=cmd_exact_selftest)

    p_list = sub.add_parser("list-presets", help="show the preset registry")
    p_list.set_defaults(fn=cmd_list_presets)

    args = parser.parse_args(argv)
    args = _apply_config(args) if hasattr(args, "config") else args
    try:
        return args.fn(args)
    except (ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
