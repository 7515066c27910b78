import math
import warnings

import numpy as np
import pytest

from freebound.grid import FrontState
from freebound.model import ReactionPair
from freebound.parabolic import (FieldPair, StepParams, WindowRejected, advance_fronts,
                                 boundary_flux, coupled_step, robust_step, solve_subproblem,
                                 v_step)

from conftest import linear_pair, make_spec, zero_pair

Y21 = np.linspace(-1, 1, 21)


def frozen(u):
    return lambda k, x: np.zeros_like(x) + u


class TestBoundaryFlux:
    def test_parabola(self):
        v = 1 - Y21**2
        assert boundary_flux(v, FrontState(0, -1, 1), StepParams(1e-3)) == pytest.approx((2.0, -2.0))

    def test_zero(self):
        assert boundary_flux(np.zeros(21), FrontState(0, -1, 1), StepParams(1e-3)) == (0.0, 0.0)

    def test_sine_second_order(self):
        errs = []
        for n in (41, 81, 161):
            y = np.linspace(-1, 1, n)
            _, right = boundary_flux(np.sin(np.pi * (1 - y) / 2), FrontState(0, -2, 2), StepParams(1e-3))
            errs.append(abs(right + math.pi / 4))
        assert errs[-1] < 2e-4
        assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.2)

    def test_first_order_option(self):
        _, right = boundary_flux(1 - Y21**2, FrontState(0, -1, 1), StepParams(1e-3, flux_order=1))
        assert right == pytest.approx(-1.9, abs=1e-12)


class TestAdvanceFronts:
    def spec(self, mu=1.0, beta=1.0):
        return make_spec(mu=mu, beta=beta)

    def test_sign_flip(self):
        f = advance_fronts(FrontState(0, -1, 1), (2.0, -2.0), self.spec(), 0.1)
        assert (f.gdot, f.hdot) == (-2.0, 2.0)
        assert f.h == pytest.approx(1.2) and f.g == pytest.approx(-1.2)

    def test_stationary(self):
        f = advance_fronts(FrontState(0, -1, 1), (0.0, 0.0), self.spec(), 0.1)
        assert (f.g, f.h) == (-1, 1)

    def test_distinct_coefficients(self):
        f = advance_fronts(FrontState(0, -1, 1), (1.0, -1.0), self.spec(1.0, 3.0), 0.1)
        assert (f.gdot, f.hdot) == (-1.0, 3.0)

    def test_corrector_averages(self):
        f = advance_fronts(FrontState(0, -1, 1), (0.0, -1.0), self.spec(), 0.1, flux_new=(0.0, -3.0))
        assert f.h == pytest.approx(1.2)
        assert f.hdot == 3.0


class TestVStep:
    def test_zero_stays_zero(self):
        spec = make_spec(reactions=zero_pair())
        v, f, clip = coupled_step(np.zeros(21), FrontState(0, -1, 1), np.zeros(21), spec,
                                  StepParams(1e-2), 1e-2)
        np.testing.assert_array_equal(v, 0.0)
        assert (f.g, f.h) == (-1, 1) and clip == 0.0

    def test_heat_mode_locked(self):
        spec = make_spec(reactions=zero_pair())
        sp = StepParams(1e-4, lock_fronts=True)
        fs = FrontState(0, -1, 1)
        y = np.linspace(-1, 1, 201)
        v = np.cos(np.pi * y / 2)
        for _ in range(1000):
            v, fs, _ = coupled_step(v, fs, 0 * v, spec, sp, sp.dt)
        exact = math.exp(-math.pi**2 * 0.1 / 4)
        assert abs(v.max() - exact) / exact < 1e-3

    def test_epidemic_step_properties(self):
        spec = make_spec("epidemic")
        y = np.linspace(-1, 1, 101)
        v0 = np.cos(np.pi * y / 2)
        v0[[0, -1]] = 0.0
        v, f, clip = coupled_step(v0, FrontState(0, -1, 1), v0, spec, StepParams(1e-3), 1e-3)
        assert np.all(np.isfinite(v)) and v[0] == 0.0 and v[-1] == 0.0
        assert np.all(v[1:-1] > 0)
        assert f.h > 1 and f.g < -1 and clip == 0.0

    def test_theta_half_heat(self):
        spec = make_spec(reactions=zero_pair())
        sp = StepParams(1e-3, theta=0.5, lock_fronts=True)
        fs = FrontState(0, -1, 1)
        v = np.cos(np.pi * np.linspace(-1, 1, 201) / 2)
        for _ in range(100):
            v, fs, _ = coupled_step(v, fs, 0 * v, spec, sp, sp.dt)
        exact = math.exp(-math.pi**2 * 0.1 / 4)
        assert abs(v.max() - exact) / exact < 1e-4

    def test_negative_clipping_recorded(self):
        # strong decay with an explicit reaction overshoots below zero
        spec = make_spec(reactions=linear_pair(0.0, -5000.0))
        fs = FrontState(0, -1, 1)
        v0 = np.cos(np.pi * Y21 / 2)
        v, clip = v_step(FieldPair(0, 0 * v0, v0), fs, fs, 0 * v0, spec.reactions,
                         StepParams(1e-3), 1.0)
        assert v.min() >= 0.0 and clip > 0.0

    def test_step_params_validation(self):
        with pytest.raises(ValueError, match="dt"):
            StepParams(0.0)
        with pytest.raises(ValueError, match="theta"):
            StepParams(1e-3, theta=0.3)


class TestRobustStep:
    def test_underflow_raises(self):
        # fronts collapse: huge inward flux cannot be resolved
        spec = make_spec(reactions=zero_pair(), mu=1e12, beta=1e12)
        v = -np.cos(np.pi * Y21 / 2)
        v[[0, -1]] = 0
        with pytest.raises(WindowRejected):
            robust_step(v, FrontState(0, -1, 1), 0 * v, spec, StepParams(1e-3, min_dt=1e-6), 1e-3)


class TestSubproblem:
    def test_u_independence(self):
        rp = ReactionPair(lambda t, x, u, v: -u, lambda t, x, u, v: v * (1 - v), "indep")
        spec = make_spec(reactions=rp)
        n = 51
        y = np.linspace(-1, 1, n)
        v0 = np.cos(np.pi * y / 2)
        init = (v0, FrontState(0, -1, 1, -1.0, 1.0))
        a = solve_subproblem(frozen(0.0), spec, (0, 0.05), StepParams(1e-3), init)
        b = solve_subproblem(lambda k, x: np.sin(x + k) ** 2, spec, (0, 0.05), StepParams(1e-3), init)
        np.testing.assert_array_equal(a.v_path, b.v_path)

    def test_symmetry(self):
        spec = make_spec("epidemic")
        n = 101
        y = np.linspace(-1, 1, n)
        v0 = np.cos(np.pi * y / 2)
        v0[[0, -1]] = 0
        res = solve_subproblem(lambda k, x: np.cos(np.pi * x / 2).clip(0), spec, (0, 0.1),
                               StepParams(1e-3), (v0, FrontState(0, -1, 1)))
        asym = max(abs(f.g + f.h) for f in res.fronts)
        assert asym <= 1e-8
        np.testing.assert_allclose(res.v_path, res.v_path[:, ::-1], atol=1e-12)

    def test_monotone_fronts(self):
        spec = make_spec("epidemic")
        y = np.linspace(-1, 1, 101)
        v0 = np.cos(np.pi * y / 2)
        v0[[0, -1]] = 0
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            res = solve_subproblem(lambda k, x: np.cos(np.pi * x / 2).clip(0), spec, (0, 0.1),
                                   StepParams(1e-3), (v0, FrontState(0, -1, 1)))
        h = np.array([f.h for f in res.fronts])
        assert np.all(np.diff(h) > 0)
        assert all(res.monotone) and not res.hopf_violations

    def test_maximum_principle(self):
        # f2 = v (2 - v) <= 0 once v >= 2
        rp = ReactionPair(lambda t, x, u, v: 0 * u, lambda t, x, u, v: v * (2 - v), "cap")
        spec = make_spec(reactions=rp)
        y = np.linspace(-1, 1, 81)
        v0 = 1.5 * np.cos(np.pi * y / 2)
        res = solve_subproblem(frozen(0.0), spec, (0, 0.5), StepParams(1e-2), (v0, FrontState(0, -1, 1)))
        assert res.v_path.max() <= 2.0 + 1e-10
