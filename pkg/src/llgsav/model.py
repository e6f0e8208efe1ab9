"""Problem definitions: parameters, initial data, exact solutions and diagnostics."""

import logging
from dataclasses import asdict, dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import spectral as sp
from .errors import UsageError
from .stepper import MAX_ORDER, MODES

log = logging.getLogger(__name__)

# Multiplier constants entering the parameter conditions of the error bounds.
TAU = (0.0, 0.0, 0.0836, 0.2878, 0.8160)


@dataclass(frozen=True)
class ProblemParams:
    gamma: float = 1.0
    beta: float = 0.0
    S: float = 0.0
    K0: float = 1.0
    w: int = 1
    dt: float = 1e-3
    T: float = 0.5
    order: int = 1
    mode: str = "explicit"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.gamma > 0:
            raise UsageError(f"gamma must be positive, got {self.gamma}")
        if not self.S >= 0:
            raise UsageError(f"S must be nonnegative, got {self.S}")
        if not self.K0 > 0:
            raise UsageError(f"K0 must be positive, got {self.K0}")
        if isinstance(self.w, bool) or int(self.w) != self.w or self.w < 1:
            raise UsageError(f"w must be a positive integer, got {self.w}")
        if not self.dt > 0:
            raise UsageError(f"dt must be positive, got {self.dt}")
        if not self.T >= 0:
            raise UsageError(f"T must be nonnegative, got {self.T}")
        if isinstance(self.order, bool) or int(self.order) != self.order or not 1 <= self.order <= MAX_ORDER:
            raise UsageError(f"order must be an integer in 1..{MAX_ORDER}, got {self.order}")
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.K0 < 0.5:
            log.info("K0=%g is below 1/2, outside the range covered by the error analysis", self.K0)
        if self.mode == "semi_implicit" and self.S:
            log.warning("semi-implicit mode ignores S=%g", self.S)
        if not self.damping_condition_holds():
            log.warning("gamma=%g does not satisfy the %s-mode condition for |beta|=%g at order %d",
                        self.gamma, self.mode, abs(self.beta), self.order)

    def damping_condition_holds(self):
        """Advisory: the condition on γ under which the convergence theory applies."""
        tau = TAU[self.order - 1]
        b = abs(self.beta)
        if self.mode == "explicit":
            return self.gamma > (1 + tau + self.order * tau) / (2 * (1 - tau)) * b or b == 0
        return self.gamma > b * tau / (1 - tau) or b == 0

    @property
    def nsteps(self):
        return int(round(self.T / self.dt))

    def replace(self, **changes):
        return replace(self, **changes)

    def asdict(self):
        return asdict(self)


@dataclass
class Problem:
    """A grid, parameters and the data needed to start (and check) a run.

    Callables take coordinate arrays ``(x, y)`` (plus ``t``) and return an
    array of shape ``(3, *x.shape)``.
    """

    kind: str
    grid: sp.Grid
    params: ProblemParams
    initial_condition: Callable
    exact_solution: Optional[Callable] = None
    forcing: Optional[Callable] = None

    def __post_init__(self):
        dev = np.abs(np.sqrt(np.sum(self.initial_field() ** 2, axis=0)) - 1.0).max()
        if dev > 1e-12:
            raise UsageError(f"initial condition is not unit length (max deviation {dev:.2e})")

    def _coords(self):
        # sparse coordinates: callables broadcast, and separable data stays cheap
        c = self.grid.coords(sparse=True)
        return c if len(c) == 2 else (c[0], np.zeros_like(c[0]))

    def _full(self, v):
        return np.ascontiguousarray(np.broadcast_to(np.asarray(v, dtype=float), (3,) + self.grid.shape))

    def initial_field(self):
        return self._full(self.initial_condition(*self._coords()))

    def exact_field(self, t):
        return self._full(self.exact_solution(*self._coords(), t))

    def forcing_field(self, t):
        x, y = self._coords()
        return self._full(self.forcing(x, y, t, self.params.gamma, self.params.beta))


# ---- manufactured solution on [0, 2π)^2 ----

def manufactured_solution(x, y, t):
    a, b = t + x, t + y
    return np.stack(np.broadcast_arrays(
        np.sin(a) * np.cos(b), np.cos(a) * np.cos(b), np.sin(b)))


def manufactured_forcing(x, y, t, gamma, beta):
    """``∂_t m - γΔm - γ|∇m|^2 m + β m × Δm`` for the manufactured solution."""
    a, b = t + x, t + y
    sa, ca, sb, cb = np.sin(a), np.cos(a), np.sin(b), np.cos(b)
    f1 = np.cos(a + b) + gamma * sa * cb * sb**2 + beta * ca * cb * sb
    f2 = -np.sin(a + b) + gamma * ca * cb * sb**2 - beta * sa * cb * sb
    f3 = cb - gamma * cb**2 * sb
    return np.stack(np.broadcast_arrays(f1, f2, f3))


# ---- blow-up data on [-1/2, 1/2)^2 ----

def blowup_initial_data(x, y):
    r2 = x * x + y * y
    r = np.sqrt(r2)
    A = np.clip(1.0 - 2.0 * r, 0.0, None) ** 4
    den = A * A + r2
    inside = r < 0.5
    # the outer branch also covers r == 1/2, where A = 0 and both branches agree
    den = np.where(inside, den, 1.0)
    m1 = np.where(inside, 2 * x * A / den, 0.0)
    m2 = np.where(inside, 2 * y * A / den, 0.0)
    m3 = np.where(inside, (A * A - r2) / den, -1.0)
    return np.stack([m1, m2, m3])


# ---- smooth data for the self-reference study on [0, 2π)^2 ----

def self_reference_initial_data(x, y):
    c = np.cos(x) * np.cos(y)
    return np.stack([c * np.sin(0.1), c * np.cos(0.1), np.sqrt(np.clip(1.0 - c * c, 0.0, None))])


def uniform_initial_data(direction=(0.0, 0.0, 1.0)):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)

    def init(x, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        return np.broadcast_to(d.reshape((3,) + (1,) * len(shape)), (3,) + shape).copy()
    return init


def manufactured_problem(params, modes=64, dealias=False):
    grid = sp.Grid.square(modes, 2 * np.pi, 0.0, dealias)
    return Problem("manufactured", grid, params,
                   lambda x, y: manufactured_solution(x, y, 0.0),
                   manufactured_solution, manufactured_forcing)


def blowup_problem(params, modes=128, dealias=False):
    grid = sp.Grid.square(modes, 1.0, -0.5, dealias)
    return Problem("blowup", grid, params, blowup_initial_data)


def self_reference_problem(params, modes=256, dealias=False):
    grid = sp.Grid.square(modes, 2 * np.pi, 0.0, dealias)
    return Problem("self_reference", grid, params, self_reference_initial_data)


def uniform_problem(params, modes=16, direction=(0.0, 0.0, 1.0), dealias=False):
    grid = sp.Grid.square(modes, 2 * np.pi, 0.0, dealias)
    return Problem("uniform", grid, params, uniform_initial_data(direction))


PROBLEMS = {
    "manufactured": manufactured_problem,
    "blowup": blowup_problem,
    "self_reference": self_reference_problem,
    "uniform": uniform_problem,
}


def diagnostics(m, grid):
    """Physical observables of a magnetisation field.

    The ``identity_residual`` entry compares ``m × (m × Δm)`` with the
    expansion ``(m·Δm) m - |m|^2 Δm`` pointwise (max abs difference).
    """
    from .sav import energy

    m_hat = sp.forward(m, grid)
    lap = sp.inverse(-grid.ksq * m_hat, grid)
    mxl = sp.cross(m, lap)
    lhs = sp.cross(m, mxl)
    rhs = sp.dot(m, lap) * m - sp.dot(m, m) * lap
    length = np.sqrt(sp.dot(m, m))
    return {
        "energy": energy(m, grid, m_hat),
        "dissipation": sp.inner_l2(mxl, mxl, grid),
        "min_length": float(length.min()),
        "max_length": float(length.max()),
        "sup_grad_norm": sp.sup_grad_norm(m, grid, m_hat),
        "identity_residual": float(np.abs(lhs - rhs).max()),
    }
