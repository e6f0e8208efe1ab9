"""
IMEX BDF-l time stepping for the reformulated Landau-Lifshitz equation

    ∂_t m = γ Δm + γ |∇m|^2 m - β m × Δm (+ f).

The provisional field m̃^{n+1} solves, in explicit mode,

    D_l m̃^{n+1} = γ Δm̃^{n+1} + S Δ(m̃^{n+1} - B_l(m^n))
                  + γ |∇B_l(m^n)|^2 B_l(m^n) - β B_l(m^n) × Δ B_l(m̃^n) + f,

which is a constant-coefficient Helmholtz problem diagonal in Fourier space.
In semi-implicit mode (S = 0) the cross term is taken at the new level,
``- β B_l(m^n) × Δm̃^{n+1}``, and the coupled system is solved with
right-preconditioned restarted GMRES.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import sav
from . import spectral as sp
from .errors import SolverError, StateError, UsageError

log = logging.getLogger(__name__)

__all__ = [
    "MAX_ORDER",
    "BdfScheme",
    "bdf_coefficients",
    "HistoryBuffer",
    "StepParams",
    "StepResult",
    "extrapolate",
    "assemble_explicit_rhs",
    "solve_explicit",
    "solve_semi_implicit",
    "Stepper",
    "bootstrap_history",
]

MAX_ORDER = 5
MODES = ("explicit", "semi_implicit")
CROSS_TERMS = ("unprojected", "projected")


@dataclass(frozen=True)
class BdfScheme:
    """Weights of the order-``l`` BDF derivative and extrapolation.

    ``D_l u^{n+1} = Σ_{i=0}^{l} a_i u^{n+1-i} / Δt`` and
    ``B_l(u^n) = Σ_{i=1}^{l} b_i u^{n+1-i}``.
    """

    order: int
    bdf_weights: tuple
    extrap_weights: tuple
    exact_bdf: tuple = ()
    exact_extrap: tuple = ()

    @property
    def a0(self):
        return self.bdf_weights[0]

    @property
    def eta_exponent(self):
        return sav.eta_exponent(self.order)


def bdf_coefficients(order):
    """Build :class:`BdfScheme` for ``1 <= order <= 5`` from exact rationals.

    ``D_l = Σ_{j=1}^{l} ∇^j / j`` in backward differences, and
    ``b_i = (-1)^{i+1} C(l, i)``.
    """
    if isinstance(order, bool) or int(order) != order or not 1 <= order <= MAX_ORDER:
        raise UsageError(f"order must be an integer in 1..{MAX_ORDER}, got {order!r}")
    order = int(order)
    a = [Fraction(0)] * (order + 1)
    for j in range(1, order + 1):
        for i in range(j + 1):
            a[i] += Fraction((-1) ** i * math.comb(j, i), j)
    b = [Fraction((-1) ** (i + 1) * math.comb(order, i)) for i in range(1, order + 1)]
    return BdfScheme(order, tuple(float(x) for x in a), tuple(float(x) for x in b),
                     tuple(a), tuple(b))


class HistoryBuffer:
    """Last ``capacity`` levels of (t, m̃, m), newest first."""

    def __init__(self, capacity):
        self.capacity = capacity
        self.times = deque(maxlen=capacity)
        self.tilde = deque(maxlen=capacity)
        self.proj = deque(maxlen=capacity)

    def __len__(self):
        return len(self.times)

    @property
    def warm(self):
        return len(self) == self.capacity

    @property
    def t(self):
        return self.times[0]

    def push(self, t, m_tilde, m):
        if self.times:
            if not t > self.times[0]:
                raise StateError(f"time stamps must increase: {self.times[0]} then {t}")
            if len(self.times) > 1:
                dt = self.times[0] - self.times[1]
                if not math.isclose(t - self.times[0], dt, rel_tol=1e-9, abs_tol=1e-14):
                    raise StateError("history spacing must be uniform")
        self.times.appendleft(t)
        self.tilde.appendleft(m_tilde)
        self.proj.appendleft(m)


@dataclass(frozen=True)
class StepParams:
    dt: float
    gamma: float = 1.0
    beta: float = 0.0
    S: float = 0.0
    mode: str = "explicit"
    tol: float = 1e-12
    max_iter: int = 200
    restart: int = 30
    cross_term: str = "unprojected"

    def __post_init__(self):
        if not self.dt > 0:
            raise UsageError(f"dt must be positive, got {self.dt}")
        if not self.gamma > 0:
            raise UsageError(f"gamma must be positive, got {self.gamma}")
        if not self.S >= 0:
            raise UsageError(f"S must be nonnegative, got {self.S}")
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.cross_term not in CROSS_TERMS:
            raise UsageError(f"cross_term must be one of {CROSS_TERMS}, got {self.cross_term!r}")
        if not (self.tol > 0 and self.max_iter >= 1 and self.restart >= 1):
            raise UsageError("solver tol, max_iter and restart must be positive")

    @property
    def stabilization(self):
        """S as used by the solve; semi-implicit mode always runs with S = 0."""
        return self.S if self.mode == "explicit" else 0.0


def extrapolate(buffer, which, scheme):
    """``Σ b_i u^{n+1-i}`` over the projected or unprojected history."""
    if len(buffer) < scheme.order:
        raise StateError(f"history holds {len(buffer)} levels, order {scheme.order} needs {scheme.order}")
    fields = {"projected": buffer.proj, "unprojected": buffer.tilde}[which]
    out = scheme.extrap_weights[0] * fields[0]
    for b, u in zip(scheme.extrap_weights[1:], list(fields)[1:scheme.order]):
        out = out + b * u
    return out


def _history_term(buffer, scheme, dt):
    out = scheme.bdf_weights[1] * buffer.tilde[0]
    for a, u in zip(scheme.bdf_weights[2:], list(buffer.tilde)[1:scheme.order]):
        out = out + a * u
    return -out / dt


def assemble_explicit_rhs(buffer, params, scheme, grid, forcing=None):
    """Right-hand side of the linear solve for m̃^{n+1}.

    Explicit mode returns
    ``-(Σ_{i>=1} a_i m̃^{n+1-i})/Δt + γ|∇B m|^2 B m - β B m × Δ B(·) - S Δ B m + f``
    where ``B(·)`` is ``B_l(m̃^n)`` (default) or ``B_l(m^n)`` per
    ``params.cross_term``. Semi-implicit mode drops the cross and
    stabilisation terms, which move to the left-hand side or vanish.
    """
    if len(buffer) < scheme.order:
        raise StateError("history buffer is not warmed up")
    b_proj = extrapolate(buffer, "projected", scheme)
    b_hat = sp.forward(b_proj, grid)
    rhs = _history_term(buffer, scheme, params.dt)
    if params.gamma:
        g2 = sp.gradient_norm_sq(b_proj, grid, b_hat)
        rhs = rhs + params.gamma * sp.dealias(g2 * b_proj, grid)
    if params.mode == "explicit":
        if params.beta:
            src = b_proj if params.cross_term == "projected" else extrapolate(buffer, "unprojected", scheme)
            lap = sp.laplacian(src, grid)
            rhs = rhs - params.beta * sp.dealias(sp.cross(b_proj, lap), grid)
        if params.S:
            rhs = rhs + params.S * sp.inverse(grid.ksq * b_hat, grid)
    if forcing is not None:
        rhs = rhs + forcing
    return rhs


def _helmholtz_symbol(params, scheme, grid):
    return scheme.a0 / params.dt + (params.gamma + params.stabilization) * grid.ksq


def solve_explicit(rhs, params, scheme, grid, return_hat=False):
    """Solve ``(a0/Δt) u - (γ+S) Δu = rhs`` mode by mode."""
    u_hat = sp.forward(rhs, grid) / _helmholtz_symbol(params, scheme, grid)
    u = sp.inverse(u_hat, grid)
    return (u, u_hat) if return_hat else u


def solve_semi_implicit(buffer, rhs_base, params, scheme, grid, b_proj=None):
    """Solve ``(a0/Δt) u - γΔu + β B_l(m^n) × Δu = rhs_base`` with GMRES.

    The constant-coefficient diagonal solve is applied as a right
    preconditioner, so the GMRES residual is the true residual.

    Returns
    -------
    u : ndarray
    iterations : int

    Raises
    ------
    SolverError
        If ``||rhs - A u|| > tol ||rhs||`` after ``max_iter`` iterations.
    """
    if b_proj is None:
        b_proj = extrapolate(buffer, "projected", scheme)
    shape = rhs_base.shape
    n = rhs_base.size
    diag = scheme.a0 / params.dt + params.gamma * grid.ksq
    beta = params.beta

    def apply_a(u):
        u_hat = sp.forward(u, grid)
        lap = sp.inverse(-grid.ksq * u_hat, grid)
        out = sp.inverse(diag * u_hat, grid)
        if beta:
            out = out + beta * sp.cross(b_proj, lap)
        return out

    def precond(v):
        return sp.inverse(sp.forward(v, grid) / diag, grid)

    op = LinearOperator((n, n), dtype=float,
                        matvec=lambda y: apply_a(precond(y.reshape(shape))).ravel())
    b = rhs_base.ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(rhs_base), 0
    counter = [0]

    def count(_):
        counter[0] += 1

    y = b.copy()
    residual = np.inf
    while True:
        remaining = params.max_iter - counter[0]
        if remaining <= 0:
            break
        before = counter[0]
        y, _ = gmres(op, b, x0=y, rtol=params.tol, atol=0.0, restart=min(params.restart, remaining),
                     maxiter=max(1, math.ceil(remaining / params.restart)),
                     callback=count, callback_type="pr_norm")
        residual = np.linalg.norm(b - op.matvec(y)) / bnorm
        if residual <= params.tol:
            return precond(y.reshape(shape)), counter[0]
        if counter[0] == before:
            break
    raise SolverError(
        f"GMRES did not reach relative residual {params.tol:g} in {params.max_iter} iterations "
        f"(final {residual:.3e})", residual=residual, iterations=counter[0])


@dataclass
class StepResult:
    t: float
    m_tilde: np.ndarray
    m_hat: np.ndarray
    m: np.ndarray
    state: sav.SavState
    iterations: int = 0


class Stepper:
    """One IMEX-GSAV step: extrapolate, solve, SAV update, correct, project.

    Parameters
    ----------
    grid : Grid
    params : StepParams
    order : int
        Target scheme order; lower orders are used during start-up.
    K0, w : float, int
        SAV constant and the exponent of the scalar shift.
    forcing : callable, optional
        ``forcing(t) -> ndarray`` sampled on the grid.
    forcing_in_sav : bool
        Add the work ``(Δm̃, f)`` of the force to the R-recursion.
    """

    def __init__(self, grid, params, order, K0=1.0, w=1, forcing=None, forcing_in_sav=True):
        self.grid = grid
        self.params = params
        self.order = order
        self.K0 = K0
        self.w = w
        self.forcing = forcing
        self.forcing_in_sav = forcing_in_sav
        self.schemes = {k: bdf_coefficients(k) for k in range(1, order + 1)}

    def step(self, buffer, R, order=None):
        """Advance from the newest level in ``buffer`` by one ``Δt``."""
        scheme = self.schemes[order or self.order]
        p, grid = self.params, self.grid
        t_next = buffer.t + p.dt
        f = self.forcing(t_next) if self.forcing is not None else None
        b_proj = extrapolate(buffer, "projected", scheme)
        rhs = assemble_explicit_rhs(buffer, p, scheme, grid, f)
        iterations = 0
        if p.mode == "explicit":
            m_tilde, m_tilde_hat = solve_explicit(rhs, p, scheme, grid, return_hat=True)
        else:
            m_tilde, iterations = solve_semi_implicit(buffer, rhs, p, scheme, grid, b_proj)
            m_tilde_hat = sp.forward(m_tilde, grid)
        lap = sp.inverse(-grid.ksq * m_tilde_hat, grid)
        source = 0.0
        if f is not None and self.forcing_in_sav:
            source = sp.inner_l2(lap, f, grid)
        state = sav.sav_update(R, m_tilde, b_proj, p.dt, p.gamma, self.K0, grid, scheme.order,
                               self.w, source=source, lap_tilde=lap, m_tilde_hat=m_tilde_hat)
        m_hat, m = sav.correct_and_project(m_tilde, state.eta, self.w)
        return StepResult(t_next, m_tilde, m_hat, m, state, iterations)


def bootstrap_history(stepper, m0, t0=0.0, exact=None):
    """Fill a history buffer with ``order`` levels.

    With ``exact(t)`` the start-up levels are the exact solution (for both m̃
    and m) and ``R = E(m) + K0`` at the newest one. Otherwise orders
    ``1..l-1`` are run for one full step each.

    Returns
    -------
    buffer : HistoryBuffer
    R : float
    steps : list of StepResult
        The start-up steps actually computed (empty for exact start-up).
    """
    grid, dt, order = stepper.grid, stepper.params.dt, stepper.order
    buffer = HistoryBuffer(order)
    buffer.push(t0, m0, m0)
    steps = []
    if exact is not None:
        for j in range(1, order):
            mj = exact(t0 + j * dt)
            buffer.push(t0 + j * dt, mj, mj)
        return buffer, sav.energy(buffer.proj[0], grid) + stepper.K0, steps
    R = sav.energy(m0, grid) + stepper.K0
    for k in range(1, order):
        res = stepper.step(buffer, R, order=k)
        buffer.push(res.t, res.m_tilde, res.m)
        R = res.state.R
        steps.append(res)
    return buffer, R, steps
