#!/usr/bin/env python3
"""Convergence against a fine fourth-order reference run (no exact solution).

The reference (order 4, dt 3.125e-6 by default) is stored as snapshots under
``--out/reference`` so later invocations (and ``llgsav converge
--reference``) can reuse it.
"""

import argparse
from pathlib import Path

from llgsav import experiments as ex
from llgsav import io, model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--order", type=int, default=2)
    ap.add_argument("--modes", type=int, default=256)
    ap.add_argument("--T", type=float, default=0.1)
    ap.add_argument("--dts", type=float, nargs="+", default=[1e-3, 5e-4, 2.5e-4, 1.25e-4])
    ap.add_argument("--reference-dt", type=float, default=3.125e-6)
    ap.add_argument("--out", default="out/self_reference")
    args = ap.parse_args()

    out = Path(args.out)
    ref_dir = out / "reference"
    base = ex.RunConfig(problem="self_reference", modes=args.modes,
                        params=model.ProblemParams(order=args.order, T=args.T, K0=1.0, w=2, S=0.0, beta=0.0))
    coarse = max(args.dts)
    times = tuple(coarse * k for k in range(1, int(round(args.T / coarse)) + 1))
    if ref_dir.is_dir() and any(ref_dir.glob("*.llf")):
        reference = io.read_snapshot_dir(ref_dir)
    else:
        ref_cfg = base.with_params(order=4, dt=args.reference_dt)
        ref_cfg.snapshot_times = times
        ref_cfg.cadence = max(1, int(round(args.T / args.reference_dt)))
        res = ex.run_simulation(ref_cfg)
        # write next to the final location and rename, so an interrupted
        # write never leaves a partial reference that would be reused
        partial = out / "reference.partial"
        partial.mkdir(parents=True, exist_ok=True)
        for t, m in res.snapshots.items():
            io.write_snapshot(partial / io.snapshot_name(t), m, res.grid, t, ref_cfg)
        partial.rename(ref_dir)
        reference = res.snapshots
    study = ex.convergence_study(base, args.dts, reference="fine_run", reference_snapshots=reference)
    io.write_errors(out / "errors.csv", study.records)
    io.write_meta(out / "errors.csv", base, dts=args.dts, reference_dt=args.reference_dt)
    for r in study.records:
        print(f"dt={r.dt:.4g}  H1(inf)={r.err_linf_h1:.3e}  H2(l2)={r.err_l2_h2:.3e}")
    print(f"slopes: linf_h1={study.slope('m', 'linf_h1'):.3f}  l2_h2={study.slope('m', 'l2_h2'):.3f}")


if __name__ == "__main__":
    main()
