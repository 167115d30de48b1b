#!/usr/bin/env python3
"""Run every registered convergence preset and collect the reports.

Desk scale by default; pass --paper-scale for the full-resolution runs
(expect hours per preset).  Reports and fitted slopes land in --out-dir.
"""

import argparse
import sys
import time
from pathlib import Path

from kpds.harness import run_convergence
from kpds.presets import PRESETS, get_preset


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=Path("reports"))
    ap.add_argument("--paper-scale", action="store_true")
    ap.add_argument("--only", nargs="*", help="subset of preset names")
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    names = args.only or sorted(PRESETS)
    for name in names:
        preset = get_preset(name, paper_scale=args.paper_scale)
        print(f"== {name} ({preset.grid.nx}x{preset.grid.ny}, t<={preset.t_max})",
              flush=True)
        t0 = time.perf_counter()
        report = run_convergence(preset)
        wall = time.perf_counter() - t0
        out = args.out_dir / f"convergence_{name}.csv"
        out.write_text(report.to_csv())
        for scheme, fit in report.fits().items():
            mark = "" if fit.converged else "  [non-decreasing legs]"
            print(f"  {scheme:10s} a = {fit.slope:6.3f}{mark}")
        print(f"  -> {out}  ({wall:.0f} s)", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
