from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st
from sympy.calculus.finite_diff import finite_diff_weights

from llgsav import spectral as sp
from llgsav.errors import SolverError, StateError, UsageError
from llgsav.stepper import (
    MAX_ORDER,
    HistoryBuffer,
    StepParams,
    Stepper,
    assemble_explicit_rhs,
    bdf_coefficients,
    bootstrap_history,
    extrapolate,
    solve_explicit,
    solve_semi_implicit,
)

from conftest import random_unit_field

ORDERS = range(1, MAX_ORDER + 1)


def _sympy_bdf(order):
    nodes = [sympy.Integer(-i) for i in range(order + 1)]
    return finite_diff_weights(1, nodes, 0)[1][-1]


def _sympy_extrap(order):
    nodes = [sympy.Integer(-i) for i in range(1, order + 1)]
    return finite_diff_weights(0, nodes, 0)[0][-1]


class TestCoefficients:
    @pytest.mark.parametrize("order", ORDERS)
    def test_bdf_matches_sympy(self, order):
        s = bdf_coefficients(order)
        expected = [Fraction(int(w.p), int(w.q)) for w in _sympy_bdf(order)]
        assert list(s.exact_bdf) == expected

    @pytest.mark.parametrize("order", ORDERS)
    def test_extrapolation_matches_sympy(self, order):
        s = bdf_coefficients(order)
        expected = [Fraction(int(w.p), int(w.q)) for w in _sympy_extrap(order)]
        assert list(s.exact_extrap) == expected

    def test_leading_coefficients(self):
        a0 = [bdf_coefficients(l).a0 for l in ORDERS]
        assert a0 == pytest.approx([1, 3 / 2, 11 / 6, 25 / 12, 137 / 60])

    @pytest.mark.parametrize("order", ORDERS)
    def test_weights_sum(self, order):
        s = bdf_coefficients(order)
        assert sum(s.exact_bdf) == 0
        assert sum(s.exact_extrap) == 1

    @pytest.mark.parametrize("bad", [0, 6, 2.5, True, -1])
    def test_rejects_order(self, bad):
        with pytest.raises(UsageError):
            bdf_coefficients(bad)

    @given(st.integers(1, MAX_ORDER), st.floats(0.1, 3.0), st.lists(st.floats(-2, 2), min_size=6, max_size=6))
    def test_exact_on_polynomials(self, order, dt, coeffs):
        s = bdf_coefficients(order)
        c = np.array(coeffs[: order + 1])
        poly = np.polynomial.Polynomial(c)
        ts = np.array([1.0 - i * dt for i in range(order + 1)])
        d = sum(a * poly(t) for a, t in zip(s.bdf_weights, ts)) / dt
        scale = 1 + np.abs(c).sum() * 3.0**order / dt
        assert d == pytest.approx(poly.deriv()(1.0), abs=1e-11 * scale)
        low = np.polynomial.Polynomial(c[:order])
        e = sum(b * low(t) for b, t in zip(s.extrap_weights, ts[1:]))
        assert e == pytest.approx(low(1.0), abs=1e-11 * (1 + np.abs(c).sum() * 3.0**order))


class TestHistoryBuffer:
    def test_newest_first(self):
        h = HistoryBuffer(2)
        for k in range(3):
            h.push(0.1 * k, np.full(1, k), np.full(1, -k))
        assert len(h) == 2 and h.warm
        assert h.t == pytest.approx(0.2)
        assert h.tilde[0][0] == 2 and h.proj[1][0] == -1

    def test_rejects_time_going_back(self):
        h = HistoryBuffer(3)
        h.push(1.0, 0, 0)
        with pytest.raises(StateError):
            h.push(1.0, 0, 0)

    def test_rejects_uneven_spacing(self):
        h = HistoryBuffer(3)
        h.push(0.0, 0, 0)
        h.push(0.1, 0, 0)
        with pytest.raises(StateError):
            h.push(0.25, 0, 0)

    def test_extrapolate_needs_enough_levels(self):
        h = HistoryBuffer(3)
        h.push(0.0, np.zeros(2), np.zeros(2))
        with pytest.raises(StateError):
            extrapolate(h, "projected", bdf_coefficients(2))

    @pytest.mark.parametrize("order", range(2, MAX_ORDER + 1))
    def test_extrapolate_linear_in_time_exactly(self, order):
        h = HistoryBuffer(order)
        base, slope = np.array([0.3, -1.0]), np.array([2.0, 0.5])
        for k in range(order):
            h.push(0.1 * k, base + slope * 0.1 * k, -(base + slope * 0.1 * k))
        target = base + slope * 0.1 * order
        assert np.allclose(extrapolate(h, "unprojected", bdf_coefficients(order)), target, atol=1e-12)
        assert np.allclose(extrapolate(h, "projected", bdf_coefficients(order)), -target, atol=1e-12)


class TestStepParams:
    @pytest.mark.parametrize("kw", [dict(dt=0), dict(dt=1, gamma=0), dict(dt=1, S=-1),
                                    dict(dt=1, mode="implicit"), dict(dt=1, cross_term="x"),
                                    dict(dt=1, tol=0)])
    def test_invalid(self, kw):
        with pytest.raises(UsageError):
            StepParams(**kw)

    def test_semi_implicit_drops_stabilisation(self):
        assert StepParams(dt=1, S=2.0, mode="semi_implicit").stabilization == 0.0
        assert StepParams(dt=1, S=2.0).stabilization == 2.0


def _warm_buffer(grid, order, rng, dt=1e-2):
    h = HistoryBuffer(order)
    for k in range(order):
        m = random_unit_field(rng, grid)
        h.push(k * dt, m, m)
    return h


class TestLinearSolves:
    def test_explicit_solve_inverts_helmholtz(self, rng, grid16):
        p = StepParams(dt=1e-2, gamma=0.7, S=0.4)
        s = bdf_coefficients(2)
        rhs = rng.standard_normal((3,) + grid16.shape)
        u = solve_explicit(rhs, p, s, grid16)
        back = s.a0 / p.dt * u - (p.gamma + p.S) * sp.laplacian(u, grid16)
        assert np.abs(back - rhs).max() <= 1e-10 * np.abs(rhs).max()

    def test_semi_implicit_residual(self, rng, grid16):
        p = StepParams(dt=1e-2, gamma=1.0, beta=0.8, mode="semi_implicit")
        s = bdf_coefficients(2)
        h = _warm_buffer(grid16, 2, rng)
        rhs = assemble_explicit_rhs(h, p, s, grid16)
        u, iters = solve_semi_implicit(h, rhs, p, s, grid16)
        b = extrapolate(h, "projected", s)
        lap = sp.laplacian(u, grid16)
        resid = s.a0 / p.dt * u - p.gamma * lap + p.beta * sp.cross(b, lap) - rhs
        assert np.linalg.norm(resid) <= 1e-10 * np.linalg.norm(rhs) * 1.01
        assert iters >= 1

    def test_semi_implicit_equals_explicit_without_precession(self, rng, grid16):
        p_semi = StepParams(dt=1e-2, mode="semi_implicit")
        p_expl = StepParams(dt=1e-2)
        s = bdf_coefficients(3)
        h = _warm_buffer(grid16, 3, rng)
        rhs = assemble_explicit_rhs(h, p_expl, s, grid16)
        u_semi, _ = solve_semi_implicit(h, rhs, p_semi, s, grid16)
        u_expl = solve_explicit(rhs, p_expl, s, grid16)
        assert np.abs(u_semi - u_expl).max() <= 1e-10 * np.abs(u_expl).max()

    def test_zero_rhs(self, rng, grid16):
        p = StepParams(dt=1e-2, beta=1.0, mode="semi_implicit")
        h = _warm_buffer(grid16, 1, rng)
        u, iters = solve_semi_implicit(h, np.zeros((3,) + grid16.shape), p, bdf_coefficients(1), grid16)
        assert iters == 0 and not u.any()

    def test_non_convergence_raises(self, rng, grid16):
        p = StepParams(dt=10.0, beta=50.0, mode="semi_implicit", tol=1e-14, max_iter=2, restart=1)
        s = bdf_coefficients(1)
        h = _warm_buffer(grid16, 1, rng)
        with pytest.raises(SolverError) as info:
            solve_semi_implicit(h, rng.standard_normal((3,) + grid16.shape), p, s, grid16)
        assert info.value.iterations <= 2
        assert info.value.residual > 1e-14


class TestStepper:
    @pytest.mark.parametrize("order", [1, 2, 4])
    @pytest.mark.parametrize("mode", ["explicit", "semi_implicit"])
    def test_uniform_state_is_fixed(self, order, mode, grid16):
        p = StepParams(dt=0.05, beta=0.9, S=0.3, mode=mode)
        st_ = Stepper(grid16, p, order, K0=1.0)
        m0 = np.zeros((3,) + grid16.shape)
        m0[0] = 1.0
        buf, R, _ = bootstrap_history(st_, m0)
        for _ in range(5):
            res = st_.step(buf, R)
            buf.push(res.t, res.m_tilde, res.m)
            R = res.state.R
        assert np.abs(res.m - m0).max() <= 1e-13
        assert R == 1.0

    def test_bootstrap_ramps_order(self, rng, grid16):
        st_ = Stepper(grid16, StepParams(dt=1e-3), 4, K0=1.0)
        m0 = random_unit_field(rng, grid16)
        buf, R, steps = bootstrap_history(st_, m0)
        assert len(buf) == 4 and len(steps) == 3
        assert buf.t == pytest.approx(3e-3)
        assert all(b.state.R < a for a, b in zip([R + 1e9] + [s.state.R for s in steps], steps))

    def test_bootstrap_exact(self, grid16, rng):
        m0 = random_unit_field(rng, grid16)
        st_ = Stepper(grid16, StepParams(dt=1e-3), 3, K0=0.5)
        buf, R, steps = bootstrap_history(st_, m0, exact=lambda t: m0)
        assert steps == [] and len(buf) == 3
        from llgsav.sav import energy
        assert R == pytest.approx(energy(m0, grid16) + 0.5)

    def test_step_outputs_unit_length(self, rng, grid16):
        st_ = Stepper(grid16, StepParams(dt=1e-3, beta=0.5, S=0.2), 2, K0=1.0)
        buf, R, _ = bootstrap_history(st_, random_unit_field(rng, grid16))
        res = st_.step(buf, R)
        assert np.abs(np.sqrt(np.sum(res.m**2, axis=0)) - 1).max() <= 1e-14
        assert 0 < res.state.R < R
