"""
Time-loop driver and reproduction studies.

``run_simulation`` executes the full IMEX-GSAV pipeline for one configuration
and checks the structural guarantees as it goes: unit length after every
step and, for explicit unforced runs, a non-increasing auxiliary variable.
``convergence_study`` and ``blowup_study`` are thin loops over it.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import model
from . import sav
from . import spectral as sp
from .errors import InvariantError, LLGError, NonFiniteError, UsageError
from .stepper import StepParams, Stepper, bootstrap_history

log = logging.getLogger(__name__)

LENGTH_TOL = 1e-12
VARIANTS = ("m", "m_hat", "m_tilde")
NORMS = ("linf_h1", "l2_h2")

BLOWUP_TIMES = (0.0, 0.01, 0.08, 0.35, 0.501, 0.51, 0.52, 0.55, 0.6)
MANUFACTURED_DTS = (2e-4, 1e-4, 5e-5, 2.5e-5, 1.25e-5)


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``modes``/``lengths``/``origin`` left as ``None`` take the problem's
    defaults (the manufactured and self-reference problems live on
    ``[0, 2π)^2``, the blow-up problem on ``[-1/2, 1/2)^2``).
    """

    problem: str = "manufactured"
    params: model.ProblemParams = field(default_factory=model.ProblemParams)
    modes: tuple | None = None
    lengths: tuple | None = None
    origin: tuple | None = None
    dealias: bool = False
    tol: float = 1e-12
    max_iter: int = 200
    restart: int = 30
    cross_term: str = "unprojected"
    forcing_in_sav: bool = True
    cadence: int = 1
    snapshot_times: tuple = ()
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.modes, (int, np.integer)):
            self.modes = (int(self.modes),) * 2
        for name in ("modes", "lengths", "origin"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, tuple(val))
        if self.problem not in (*model.PROBLEMS, "custom"):
            raise UsageError(f"unknown problem kind {self.problem!r}")
        if int(self.cadence) != self.cadence or self.cadence < 1:
            raise UsageError(f"output cadence must be an integer >= 1, got {self.cadence}")
        self.step_params()

    def step_params(self):
        p = self.params
        return StepParams(dt=p.dt, gamma=p.gamma, beta=p.beta, S=p.S, mode=p.mode, tol=self.tol,
                          max_iter=self.max_iter, restart=self.restart, cross_term=self.cross_term)

    def with_params(self, **changes):
        return replace(self, params=self.params.replace(**changes))


DEFAULT_MODES = {"manufactured": 64, "blowup": 128, "self_reference": 256, "uniform": 16}


def build_problem(config):
    """Instantiate the :class:`~llgsav.model.Problem` a config refers to."""
    kind = config.problem
    if kind == "custom":
        return _custom_problem(config)
    n = config.modes or DEFAULT_MODES[kind]
    if isinstance(n, (tuple, list)):
        if len(set(n)) != 1:
            raise UsageError(f"problem {kind!r} needs a square grid, got modes={n}")
        n = n[0]
    kwargs = {}
    if kind == "uniform" and "direction" in config.options:
        kwargs["direction"] = config.options["direction"]
    return model.PROBLEMS[kind](config.params, int(n), dealias=config.dealias, **kwargs)


def _custom_problem(config):
    from .io import read_snapshot

    opts = config.options
    if "initial" in opts:
        snap = read_snapshot(opts["initial"])
        grid = replace(snap.grid, dealias=config.dealias)
        data = snap.m
        return model.Problem("custom", grid, config.params, lambda x, y: data)
    if config.modes is None or config.lengths is None:
        raise UsageError("custom problems need grid modes and lengths, or an initial snapshot")
    grid = sp.Grid(config.modes, config.lengths, config.origin, config.dealias)
    direction = opts.get("direction", (0.0, 0.0, 1.0))
    return model.Problem("custom", grid, config.params, model.uniform_initial_data(direction))


@dataclass
class TimeSeriesRow:
    step: int
    t: float
    E: float
    R: float
    xi: float
    eta: float
    cross_sq: float
    min_mhat: float
    max_len_dev: float
    sup_grad_norm: float
    solver_iters: int


@dataclass
class ErrorRecord:
    """Errors of one run against the exact or reference solution.

    ``linf_h1`` is ``max_n ||e^n||_{H^1}`` and ``l2_h2`` is
    ``sqrt(Σ_n τ_n ||e^n||_{H^2}^2)`` with ``τ_n`` the spacing between the
    compared times (``Δt`` when every step is compared).
    """

    dt: float
    errors: dict  # variant -> {"linf_h1": float, "l2_h2": float}
    xi_dev: float = 0.0  # max_n |1 - ξ^n|

    def __getitem__(self, key):
        variant, norm = key
        return self.errors[variant][norm]

    @property
    def err_linf_h1(self):
        return self.errors["m"]["linf_h1"]

    @property
    def err_l2_h2(self):
        return self.errors["m"]["l2_h2"]


class _ErrorAccumulator:
    def __init__(self, dt):
        self.dt = dt
        self.linf = dict.fromkeys(VARIANTS, 0.0)
        self.sq = dict.fromkeys(VARIANTS, 0.0)
        self.xi_dev = 0.0

    def add(self, grid, target, fields, weight):
        for name, f in zip(VARIANTS, fields):
            _, h1, h2 = sp.sobolev_norms(f - target, grid)
            self.linf[name] = max(self.linf[name], h1)
            self.sq[name] += weight * h2 * h2

    def record(self):
        errors = {v: {"linf_h1": self.linf[v], "l2_h2": math.sqrt(self.sq[v])} for v in VARIANTS}
        return ErrorRecord(self.dt, errors, self.xi_dev)


@dataclass
class SimulationResult:
    config: RunConfig
    grid: sp.Grid
    m: np.ndarray
    m_hat: np.ndarray
    m_tilde: np.ndarray
    t: float
    rows: list
    snapshots: dict
    # per-level scalars, index 0 is the initial state
    times: np.ndarray
    R: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    cross_sq: np.ndarray
    source: np.ndarray
    max_len_dev: np.ndarray
    iterations: np.ndarray
    errors: ErrorRecord | None = None
    wall_time: float = 0.0

    @property
    def R0(self):
        return float(self.R[0])

    def energy_identity_residual(self, gamma, dt):
        """``max_m |R^m + Σ_{n<m} Δt ξ^{n+1}(γ c^{n+1} + s^{n+1}) - R^0| / R^0``.

        Levels whose R was set directly (exact start-up) restart the sum.
        """
        start = int(np.nonzero(self.cross_sq < 0)[0][-1])
        R, xi, c, s = self.R[start:], self.xi[start:], self.cross_sq[start:], self.source[start:]
        work = np.concatenate([[0.0], np.cumsum(dt * xi[1:] * (gamma * c[1:] + s[1:]))])
        return float(np.max(np.abs(R + work - R[0])) / R[0])


def _row(n, t, m, m_hat_field, state, R, iters, grid, len_dev):
    f_hat = sp.forward(m, grid)
    E = sav.energy(m, grid, f_hat)
    return TimeSeriesRow(
        step=n, t=t, E=E, R=R,
        xi=state.xi if state else 1.0,
        eta=state.eta if state else 1.0,
        cross_sq=state.cross_sq if state else 0.0,
        min_mhat=float(np.sqrt(np.min(np.sum(m_hat_field**2, axis=0)))),
        max_len_dev=len_dev,
        sup_grad_norm=sp.sup_grad_norm(m, grid, f_hat),
        solver_iters=iters)


def _len_dev(m):
    return float(np.max(np.abs(np.sqrt(np.sum(m * m, axis=0)) - 1.0)))


def run_simulation(config, problem=None, reference=None, observer=None):
    """Run one simulation.

    Parameters
    ----------
    config : RunConfig
    problem : Problem, optional
        Overrides ``build_problem(config)``.
    reference : dict, optional
        ``{time: field}`` reference snapshots; errors are measured at these
        times instead of against an exact solution.
    observer : callable, optional
        ``observer(step, t, m)`` called after the initial state and every step.

    Raises
    ------
    LLGError
        Projection, solver, non-finite or invariant failures, with ``.step`` set.
    """
    started = time.perf_counter()
    problem = problem or build_problem(config)
    grid, p = problem.grid, config.params
    nsteps = p.nsteps
    if nsteps and nsteps < p.order - 1:
        raise UsageError(f"T={p.T} is shorter than the {p.order - 1} start-up steps")
    forcing = problem.forcing_field if problem.forcing is not None else None
    stepper = Stepper(grid, config.step_params(), p.order, p.K0, p.w, forcing, config.forcing_in_sav)
    enforce_decay = p.mode == "explicit" and forcing is None

    m0 = problem.initial_field()
    exact = problem.exact_field if problem.exact_solution is not None and reference is None else None
    acc = _ErrorAccumulator(p.dt) if (exact is not None or reference is not None) else None
    ref_times = sorted(reference) if reference is not None else []
    ref_lookup = {int(round(t / p.dt)): t for t in ref_times}
    if reference is not None:
        missing = [t for t in ref_times if abs(round(t / p.dt) * p.dt - t) > 1e-9 * max(1.0, t) or t > p.T + 1e-12]
        if missing:
            raise UsageError(f"reference times {missing[:3]} are not reachable with dt={p.dt}")
    snap_steps = {}
    for ts in config.snapshot_times:
        k = int(round(ts / p.dt))
        if 0 <= k <= nsteps:
            snap_steps.setdefault(k, ts)

    scalars = {k: [] for k in ("times", "R", "xi", "eta", "cross_sq", "source", "max_len_dev", "iterations")}
    rows, snapshots = [], {}
    last_ref_t = [0.0]

    def record(n, t, m, m_hat, m_tilde, state, iters):
        dev = _len_dev(m)
        if not np.all(np.isfinite(m_tilde)):
            raise NonFiniteError(f"non-finite values in the provisional field at step {n}")
        if dev > LENGTH_TOL:
            raise InvariantError(f"max ||m|-1| = {dev:.3e} exceeds {LENGTH_TOL:g} at step {n}")
        R = state.R if state else sav.energy(m, grid) + p.K0
        if enforce_decay and scalars["R"] and R > scalars["R"][-1]:
            raise InvariantError(f"auxiliary variable increased at step {n}: {scalars['R'][-1]!r} -> {R!r}")
        if p.mode == "semi_implicit" and scalars["R"] and R > scalars["R"][-1]:
            log.info("R increased at step %d in semi-implicit mode", n)
        for key, val in (("times", t), ("R", R), ("xi", state.xi if state else 1.0),
                         ("eta", state.eta if state else 1.0),
                         ("cross_sq", state.cross_sq if state else -1.0),
                         ("source", state.source if state else 0.0),
                         ("max_len_dev", dev), ("iterations", iters)):
            scalars[key].append(val)
        if acc is not None:
            if state:
                acc.xi_dev = max(acc.xi_dev, abs(1.0 - state.xi))
            if exact is not None and n > 0:
                acc.add(grid, exact(t), (m, m_hat, m_tilde), p.dt)
            elif n in ref_lookup and n > 0:
                tr = ref_lookup[n]
                acc.add(grid, reference[tr], (m, m_hat, m_tilde), tr - last_ref_t[0])
                last_ref_t[0] = tr
        if n % config.cadence == 0 or n == nsteps:
            rows.append(_row(n, t, m, m_hat, state, R, iters, grid, dev))
        if n in snap_steps:
            snapshots[snap_steps[n]] = m.copy()
        if observer is not None:
            observer(n, t, m)

    try:
        record(0, 0.0, m0, m0, m0, None, 0)
        if nsteps == 0:
            return _result(config, grid, m0, m0, m0, 0.0, rows, snapshots, scalars, acc, started)
        buffer, R, startup = bootstrap_history(stepper, m0, 0.0, exact)
        if exact is not None:
            for j in range(1, p.order):
                mj = buffer.proj[p.order - 1 - j]
                record(j, buffer.times[p.order - 1 - j], mj, mj, mj, None, 0)
        else:
            for j, res in enumerate(startup, start=1):
                record(j, res.t, res.m, res.m_hat, res.m_tilde, res.state, res.iterations)
        res = None
        for n in range(p.order, nsteps + 1):
            try:
                res = stepper.step(buffer, R)
            except LLGError as exc:
                exc.step = n
                raise
            buffer.push(res.t, res.m_tilde, res.m)
            R = res.state.R
            record(n, res.t, res.m, res.m_hat, res.m_tilde, res.state, res.iterations)
        if res is None:
            m = buffer.proj[0]
            return _result(config, grid, m, m, buffer.tilde[0], buffer.t, rows, snapshots, scalars, acc, started)
        return _result(config, grid, res.m, res.m_hat, res.m_tilde, res.t, rows, snapshots, scalars, acc, started)
    except LLGError as exc:
        if exc.step is None:
            exc.step = len(scalars["R"])
        raise


def _result(config, grid, m, m_hat, m_tilde, t, rows, snapshots, scalars, acc, started):
    arrays = {k: np.asarray(v, dtype=int if k == "iterations" else float) for k, v in scalars.items()}
    return SimulationResult(config=config, grid=grid, m=m, m_hat=m_hat, m_tilde=m_tilde, t=t, rows=rows,
                            snapshots=snapshots, errors=acc.record() if acc else None,
                            wall_time=time.perf_counter() - started, **arrays)


def slope_fit(dts, errors):
    """Least-squares slope of ``log(error)`` against ``log(dt)``."""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dts.shape != errors.shape or dts.size < 2:
        raise UsageError("slope_fit needs at least two (dt, error) pairs")
    if np.any(dts <= 0) or np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        raise UsageError("slope_fit needs positive, finite dt and error values")
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


@dataclass
class ConvergenceResult:
    records: list
    floor: float = 0.0

    @property
    def dts(self):
        return [r.dt for r in self.records]

    def slope(self, variant="m", norm="linf_h1", floor=None):
        """Fitted order using only errors at or above ``floor``."""
        floor = self.floor if floor is None else floor
        pairs = [(r.dt, r[variant, norm]) for r in self.records if r[variant, norm] >= floor]
        if len(pairs) < 2:
            return float("nan")
        return slope_fit(*zip(*pairs))

    def xi_slope(self):
        return slope_fit(self.dts, [r.xi_dev for r in self.records])

    def table(self):
        return {(v, k): self.slope(v, k) for v in VARIANTS for k in NORMS}


def convergence_study(base, dts=MANUFACTURED_DTS, reference="exact", reference_snapshots=None,
                      reference_dt=3.125e-6, reference_order=4, floor=0.0, progress=None):
    """Run ``base`` at each ``dt`` and measure errors.

    ``reference="exact"`` uses the problem's exact solution at every step.
    ``reference="fine_run"`` compares against ``reference_snapshots``
    (``{t: m}``) or, if absent, a fresh run at ``reference_dt`` with order
    ``reference_order`` sampled at every multiple of ``max(dts)``.
    """
    dts = sorted((float(d) for d in dts), reverse=True)
    if len(dts) < 3:
        raise UsageError("a convergence study needs at least three time steps")
    ratios = [dts[i] / dts[i + 1] for i in range(len(dts) - 1)]
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise UsageError(f"time steps must form a geometric progression, got {dts}")
    if reference not in ("exact", "fine_run"):
        raise UsageError(f"reference must be 'exact' or 'fine_run', got {reference!r}")
    if reference == "fine_run" and reference_snapshots is None:
        coarse = dts[0]
        times = tuple(coarse * k for k in range(1, int(round(base.params.T / coarse)) + 1))
        ref_cfg = replace(base, params=base.params.replace(dt=reference_dt, order=reference_order),
                          snapshot_times=times, cadence=max(1, int(round(base.params.T / reference_dt))))
        reference_snapshots = run_simulation(ref_cfg).snapshots
    records = []
    for dt in dts:
        cfg = replace(base, params=base.params.replace(dt=dt),
                      cadence=max(1, int(round(base.params.T / dt))))
        try:
            res = run_simulation(cfg, reference=reference_snapshots if reference == "fine_run" else None)
        except LLGError as exc:
            exc.args = (f"dt={dt:g}: {exc}",) + exc.args[1:]
            raise
        if res.errors is None:
            raise UsageError(f"problem {base.problem!r} has no exact solution; use reference='fine_run'")
        records.append(res.errors)
        if progress:
            progress(dt, res)
    return ConvergenceResult(records, floor)


def blowup_config(modes=128, dt=1e-6, T=0.6, order=2, gamma=1.0, cadence=100, mode="explicit"):
    """Blow-up run parameters: S=0.5, β=1, w=1, K0=0.1, γ=1 by default."""
    params = model.ProblemParams(gamma=gamma, beta=1.0, S=0.5, K0=0.1, w=1, dt=dt, T=T,
                                 order=order, mode=mode)
    return RunConfig(problem="blowup", params=params, modes=modes, cadence=cadence,
                     snapshot_times=tuple(t for t in BLOWUP_TIMES if t <= T + 1e-12))


@dataclass
class BlowupSeries:
    modes: int
    t: np.ndarray
    energy: np.ndarray
    R: np.ndarray
    sup_grad: np.ndarray
    snapshots: dict
    origin_dev: float  # max over all steps of |m(0,0,t) - (0,0,1)|
    result: SimulationResult

    @property
    def max_sup_grad(self):
        return float(np.max(self.sup_grad))


def blowup_study(modes_list=(32, 64, 128), dt=1e-5, T=0.6, cadence=None, base=None, progress=None,
                 **kwargs):
    """Run the blow-up configuration at each resolution.

    ``base`` (a :class:`RunConfig`) supplies every setting other than the
    resolution, ``dt`` and ``T``; without it :func:`blowup_config` defaults
    are used, with ``kwargs`` passed through.
    """
    out = {}
    for n in modes_list:
        cad = cadence or max(1, int(round(1e-3 / dt)))
        if base is None:
            cfg = blowup_config(modes=n, dt=dt, T=T, cadence=cad, **kwargs)
        else:
            cfg = replace(base, problem="blowup", modes=(n, n), cadence=cad,
                          params=base.params.replace(dt=dt, T=T))
        problem = build_problem(cfg)
        i0 = j0 = n // 2  # x = y = 0 on [-1/2, 1/2)
        north = np.array([0.0, 0.0, 1.0])
        dev = [0.0]

        def watch(step, t, m, dev=dev, i0=i0, j0=j0):
            dev[0] = max(dev[0], float(np.max(np.abs(m[:, i0, j0] - north))))

        res = run_simulation(cfg, problem, observer=watch)
        out[n] = BlowupSeries(
            modes=n,
            t=np.array([r.t for r in res.rows]),
            energy=np.array([r.E for r in res.rows]),
            R=np.array([r.R for r in res.rows]),
            sup_grad=np.array([r.sup_grad_norm for r in res.rows]),
            snapshots=res.snapshots, origin_dev=dev[0], result=res)
        if progress:
            progress(n, out[n])
    return out
