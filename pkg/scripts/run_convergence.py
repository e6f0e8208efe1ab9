#!/usr/bin/env python3
"""Manufactured-solution convergence tables for orders 1-4.

Writes ``errors_l{order}_beta{beta}_{mode}.csv`` per study and prints the
fitted slopes. Orders 3 and 4 use coarser ladders (see README).

    python3 scripts/run_convergence.py --orders 1 2 --betas 0 0.5 --out out/convergence
"""

import argparse
import math
import time
from pathlib import Path

from llgsav import experiments as ex
from llgsav import io, model

LADDERS = {
    1: ex.MANUFACTURED_DTS,
    2: ex.MANUFACTURED_DTS,
    3: (1e-3, 5e-4, 2.5e-4, 1.25e-4),
    4: tuple(math.sqrt(2) * 1e-3 * 2 ** (-k / 4) for k in range(4)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--orders", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--betas", type=float, nargs="+", default=[0.0, 0.5])
    ap.add_argument("--mode", default="explicit", choices=["explicit", "semi_implicit"])
    ap.add_argument("--modes", type=int, default=64)
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--floor", type=float, default=1e-11)
    ap.add_argument("--out", default="out/convergence")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for order in args.orders:
        for beta in args.betas:
            params = model.ProblemParams(beta=beta, order=order, T=args.T, dt=LADDERS[order][0], mode=args.mode)
            base = ex.RunConfig(problem="manufactured", params=params, modes=args.modes, dealias=order == 4)
            started = time.perf_counter()
            study = ex.convergence_study(base, LADDERS[order], floor=args.floor)
            path = out / f"errors_l{order}_beta{beta:g}_{args.mode}.csv"
            io.write_errors(path, study.records)
            io.write_meta(path, base, wall_time=time.perf_counter() - started, dts=list(LADDERS[order]),
                          floor=args.floor)
            print(f"l={order} beta={beta:g} {args.mode}:")
            for r in study.records:
                print(f"  dt={r.dt:.4g}  H1(inf)={r.err_linf_h1:.3e}  H2(l2)={r.err_l2_h2:.3e}  "
                      f"max|1-xi|={r.xi_dev:.2e}")
            print(f"  slopes: linf_h1={study.slope('m', 'linf_h1'):.3f}  l2_h2={study.slope('m', 'l2_h2'):.3f}  "
                  f"xi={study.xi_slope():.3f}  -> {path}")


if __name__ == "__main__":
    main()
