"""Command-line front end: ``llgsav {run,converge,blowup,check}``."""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import experiments as ex
from . import io
from .errors import LLGError, UsageError

log = logging.getLogger("llgsav")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

OVERRIDES = {
    "dt": float, "order": int, "beta": float, "gamma": float, "S": float,
    "K0": float, "w": int, "T": float, "mode": str,
}


def _csv_list(conv):
    def parse(text):
        try:
            return [conv(v) for v in text.replace(" ", "").split(",") if v]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def build_parser():
    parser = argparse.ArgumentParser(prog="llgsav", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="INI configuration file")
        for key, conv in OVERRIDES.items():
            p.add_argument(f"--{key}", dest=key, type=conv, default=None)
        p.add_argument("--modes", type=int, default=None, help="grid points per axis")
        p.add_argument("--cadence", type=int, default=None)
        p.add_argument("--output", default=None, help="output directory")

    common(sub.add_parser("run", help="single simulation"))
    conv = sub.add_parser("converge", help="time-step convergence study")
    common(conv)
    conv.add_argument("--dts", type=_csv_list(float), default=None)
    conv.add_argument("--reference", default=None,
                      help="directory of reference snapshots (fine-run reference)")
    conv.add_argument("--floor", type=float, default=0.0,
                      help="ignore errors below this value when fitting slopes")
    blow = sub.add_parser("blowup", help="blow-up study over resolutions")
    common(blow)
    blow.add_argument("--modes-list", "--resolutions", dest="modes_list",
                      type=_csv_list(int), default=[32, 64, 128])
    sub.add_parser("check", help="run the built-in oracle self-test")
    return parser


def _resolve(args):
    cf = io.load_config(args.config)
    run = cf.run
    changes = {k: getattr(args, k) for k in OVERRIDES if getattr(args, k, None) is not None}
    if changes:
        try:
            run = dataclasses.replace(run, params=run.params.replace(**changes))
        except UsageError as exc:
            raise io.ConfigError(f"command-line override: {exc}") from exc
    if getattr(args, "modes", None):
        n = args.modes
        run = dataclasses.replace(run, modes=(n,) * (len(run.modes) if run.modes else 2))
    if getattr(args, "cadence", None):
        run = dataclasses.replace(run, cadence=args.cadence)
    cf.run = run
    if getattr(args, "output", None):
        cf.directory = args.output
    return cf


def _write_run(outdir, res, cf):
    outdir.mkdir(parents=True, exist_ok=True)
    ts = outdir / "timeseries.csv"
    io.write_timeseries(ts, res.rows)
    io.write_meta(ts, cf, wall_time=res.wall_time, final_time=res.t)
    for t, m in sorted(res.snapshots.items()):
        io.write_snapshot(outdir / io.snapshot_name(t), m, res.grid, t, cf)
    io.write_snapshot(outdir / "final.llf", res.m, res.grid, res.t, cf)


def cmd_run(args):
    cf = _resolve(args)
    res = ex.run_simulation(cf.run)
    out = Path(cf.directory)
    _write_run(out, res, cf)
    last = res.rows[-1]
    print(f"t={last.t:.6g} steps={last.step} E={last.E:.10g} R={last.R:.10g} "
          f"max||m|-1|={res.max_len_dev.max():.2e} wall={res.wall_time:.2f}s -> {out}")
    return EXIT_OK


def cmd_converge(args):
    cf = _resolve(args)
    dts = args.dts or list(ex.MANUFACTURED_DTS)
    reference = args.reference or cf.reference
    kwargs = {}
    if reference:
        kwargs = {"reference": "fine_run", "reference_snapshots": io.read_snapshot_dir(reference)}
    study = ex.convergence_study(cf.run, dts, floor=args.floor,
                                 progress=lambda dt, r: log.info("dt=%g done in %.1fs", dt, r.wall_time),
                                 **kwargs)
    out = Path(cf.directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "errors.csv"
    io.write_errors(path, study.records)
    io.write_meta(path, cf, dts=dts)
    print(f"{'dt':>10} " + " ".join(f"{v + ':' + n:>18}" for v in ex.VARIANTS for n in ex.NORMS))
    for r in study.records:
        print(f"{r.dt:10.4g} " + " ".join(f"{r[v, n]:18.6e}" for v in ex.VARIANTS for n in ex.NORMS))
    print(f"{'slope':>10} " + " ".join(f"{study.slope(v, n):18.3f}" for v in ex.VARIANTS for n in ex.NORMS))
    print(f"order {cf.run.params.order}: slope(linf_h1)={study.slope('m', 'linf_h1'):.3f} "
          f"slope(l2_h2)={study.slope('m', 'l2_h2'):.3f} -> {path}")
    return EXIT_OK


def cmd_blowup(args):
    cf = _resolve(args)
    p = cf.run.params
    out = Path(cf.directory)
    print(f"{'N':>5} {'max sup|grad m|':>16} {'E(T)':>14} {'origin dev':>12}")
    for n in args.modes_list:
        base = dataclasses.replace(cf.run, problem="blowup",
                                   snapshot_times=cf.run.snapshot_times or ex.BLOWUP_TIMES)
        series = ex.blowup_study((n,), dt=p.dt, T=p.T, cadence=base.cadence, base=base)[n]
        _write_run(out / f"N{n}", series.result, dataclasses.replace(cf, run=series.result.config))
        print(f"{n:5d} {series.max_sup_grad:16.6g} {series.energy[-1]:14.6g} {series.origin_dev:12.3e}")
    return EXIT_OK


def cmd_check(args):
    from .selfcheck import run_checks
    return EXIT_OK if run_checks() else EXIT_USAGE


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "blowup": cmd_blowup, "check": cmd_check}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LLGError as exc:
        step = f" at step {exc.step}" if exc.step is not None else ""
        print(f"solver failure{step}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
