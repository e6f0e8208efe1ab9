"""Fast oracle checks run by ``llgsav check``."""

import math
from fractions import Fraction

import numpy as np

from . import experiments as ex
from . import model, sav
from . import spectral as sp
from .stepper import MAX_ORDER, bdf_coefficients


def _coefficients():
    worst = 0.0
    for l in range(1, MAX_ORDER + 1):
        s = bdf_coefficients(l)
        for p in range(l + 1):
            # u(t) = t^p sampled at t = 1 - i for i = 0..l, derivative at t = 1 is p
            d = sum(a * Fraction(1 - i) ** p for i, a in enumerate(s.exact_bdf))
            worst = max(worst, abs(float(d) - p))
            if p <= l - 1:
                e = sum(b * Fraction(1 - i) ** p for i, b in enumerate(s.exact_extrap, start=1))
                worst = max(worst, abs(float(e) - 1.0))
    return worst <= 1e-10, f"max defect {worst:.1e}"


def _spectral():
    g = sp.Grid.square(16)
    x, y = g.coords()
    f = np.sin(3 * x) * np.cos(2 * y)
    err = np.abs(sp.laplacian(f, g) + 13 * f).max()
    d = np.abs(sp.partial_derivative(f, g, 0) - 3 * np.cos(3 * x) * np.cos(2 * y)).max()
    rng = np.random.default_rng(0)
    r = rng.standard_normal((3,) + g.shape)
    pars = abs(sp.sobolev_norms(r, g)[0] - sp.norm_l2(r, g)) / sp.norm_l2(r, g)
    return max(err, d) <= 1e-12 and pars <= 1e-10, f"laplacian {err:.1e}, d/dx {d:.1e}, parseval {pars:.1e}"


def _forcing():
    g = sp.Grid.square(64)
    x, y = g.coords()
    worst = 0.0
    for t in (0.0, 0.37):
        for gamma, beta in ((1.0, 0.0), (1.0, 0.5)):
            m = model.manufactured_solution(x, y, t)
            a, b = t + x, t + y
            dt_m = np.stack([np.cos(a + b), -np.sin(a + b), np.cos(b)])
            lap = sp.laplacian(m, g)
            rhs = gamma * lap + gamma * sp.gradient_norm_sq(m, g) * m - beta * sp.cross(m, lap)
            res = dt_m - rhs - model.manufactured_forcing(x, y, t, gamma, beta)
            worst = max(worst, np.abs(res).max())
    return worst <= 1e-11, f"max residual {worst:.1e}"


def _steady():
    worst = 0.0
    for order in (1, 3):
        p = model.ProblemParams(order=order, dt=1e-2, T=0.1, beta=0.7, S=0.3)
        res = ex.run_simulation(ex.RunConfig(problem="uniform", params=p, modes=8))
        worst = max(worst, np.abs(res.m_tilde - np.array([0, 0, 1.0])[:, None, None]).max())
    return worst <= 1e-12, f"max drift {worst:.1e}"


def _short_run():
    p = model.ProblemParams(order=2, dt=2e-4, T=0.01, beta=1.0, S=0.5, K0=0.1)
    res = ex.run_simulation(ex.blowup_config(modes=32, dt=2e-4, T=0.01, cadence=10))
    mono = sav.monotonicity_monitor(res.R, res.cross_sq).passed
    ident = res.energy_identity_residual(p.gamma, p.dt)
    dev = res.max_len_dev.max()
    ok = mono and ident <= 1e-10 and dev <= 1e-12
    return ok, f"R monotone={mono}, identity {ident:.1e}, length {dev:.1e}"


CHECKS = [
    ("BDF/extrapolation polynomial exactness", _coefficients),
    ("spectral operator exactness and Parseval", _spectral),
    ("manufactured forcing residual", _forcing),
    ("uniform steady state is a fixed point", _steady),
    ("blow-up smoke run: decay, identity, unit length", _short_run),
]


def run_checks(echo=print):
    ok = True
    for name, fn in CHECKS:
        try:
            passed, detail = fn()
        except Exception as exc:  # report, keep going
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        ok = ok and passed
        echo(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return ok


if __name__ == "__main__":
    raise SystemExit(0 if run_checks() else 1)
