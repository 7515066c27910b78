import math

import numpy as np
import pytest

from freebound.grid import FrontState
from freebound.model import ReactionPair
from freebound.transport import (INITIAL, LEFT, NEVER, RIGHT, CharacteristicLine, CoverageGap,
                                 LineBundle, NonMonotoneFronts, StepLookup, entry_time,
                                 entry_times, integrate_characteristic, rebuild_u_field,
                                 seed_positions, transport_window)

from conftest import linear_pair


def const_v(value):
    return lambda t, x: np.full(np.shape(x), float(value))


def linear_fronts(gdot, hdot, T=1.0, steps=10, h0=1.0):
    return [FrontState(t, -h0 + gdot * t, h0 + hdot * t, gdot, hdot)
            for t in np.linspace(0, T, steps + 1)]


class TestEntryTime:
    def test_right_front(self):
        e = entry_time(linear_fronts(0.0, 1.0), 1.5)
        assert e.t_x == pytest.approx(0.5, abs=1e-14) and e.flag == RIGHT

    def test_initial(self):
        e = entry_time(linear_fronts(-1.0, 1.0), 0.3)
        assert e == type(e)(0.0, INITIAL)

    def test_left_front(self):
        e = entry_time(linear_fronts(-2.0, 0.0), -1.5)
        assert e.t_x == pytest.approx(0.25, abs=1e-14) and e.flag == LEFT

    def test_never(self):
        e = entry_time(linear_fronts(-1.0, 1.0), 5.0)
        assert math.isnan(e.t_x) and e.flag == NEVER

    def test_vectorised_and_tuple_input(self):
        t = np.linspace(0, 1, 5)
        tx, flags = entry_times((t, -1 - t, 1 + t), [-1.75, 0.0, 1.25])
        np.testing.assert_allclose(tx, [0.75, 0.0, 0.25], atol=1e-14)
        assert list(flags) == [LEFT, INITIAL, RIGHT]

    def test_non_monotone_rejected(self):
        t = np.linspace(0, 1, 3)
        with pytest.raises(NonMonotoneFronts):
            entry_times((t, -np.ones(3), np.array([1.0, 1.2, 1.1])), 0.0)

    def test_lipschitz_in_x(self):
        # |t_x1 - t_x2| <= |x1 - x2| / sigma for a front moving at speed sigma = 2
        fr = linear_fronts(0.0, 2.0, steps=50)
        x = np.linspace(1.01, 2.99, 40)
        tx, _ = entry_times(fr, x)
        assert np.all(np.abs(np.diff(tx)) <= np.diff(x) / 2.0 + 1e-14)


class TestIntegrateCharacteristic:
    def test_exponential(self):
        line = CharacteristicLine(0.0, 0.0, 1.0)
        integrate_characteristic(line, const_v(0), linear_pair(-1.0), (0.0, 1.0), 1e-3)
        assert abs(line.samples[-1] - math.exp(-1)) <= 1e-9

    def test_forced_linear(self):
        rp = ReactionPair(lambda t, x, u, v: v - u, lambda t, x, u, v: 0 * v, "forced")
        vbar, tx = 0.7, 0.2345
        line = CharacteristicLine(1.3, tx, 0.0)
        integrate_characteristic(line, const_v(vbar), rp, (0.0, 1.0), 1e-2)
        t = line.times
        exact = np.where(t >= tx, vbar * (1 - np.exp(-(t - tx))), 0.0)
        np.testing.assert_allclose(line.samples, exact, atol=1e-10)

    def test_zero_source(self):
        line = CharacteristicLine(0.0, 0.0, 0.42)
        integrate_characteristic(line, const_v(3.0), linear_pair(0.0), (0.0, 1.0), 0.1)
        np.testing.assert_array_equal(line.samples, 0.42)

    def test_fourth_order(self):
        errs = []
        for dt in (0.1, 0.05, 0.025):
            line = CharacteristicLine(0.0, 0.0, 1.0)
            integrate_characteristic(line, const_v(0), linear_pair(-1.0), (0.0, 1.0), dt)
            errs.append(abs(line.samples[-1] - math.exp(-1)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 3.8)

    def test_negative_clipped(self):
        # RK4 never overshoots on linear decay, so use a constant sink
        sink = ReactionPair(lambda t, x, u, v: -10.0 + 0 * u, lambda t, x, u, v: 0 * v, "sink")
        line = CharacteristicLine(0.0, 0.0, 1.0)
        integrate_characteristic(line, const_v(0), sink, (0.0, 1.0), 0.1)
        assert line.samples.min() >= 0.0 and line.clipped > 0.0


class TestStepLookup:
    def test_blends_in_time(self):
        f0, f1 = FrontState(0, -1, 1), FrontState(0.1, -1, 1)
        look = StepLookup(f0, f1, np.ones(11), 3 * np.ones(11))
        assert look(0.05, np.array([0.2]))[0] == pytest.approx(2.0)
        assert look(0.05, np.array([1.5]))[0] == 0.0


class TestRebuild:
    def test_constant_lines(self):
        fs = FrontState(0, -1, 1)
        b = LineBundle.constant([0.0], np.linspace(-1, 1, 41), np.ones(41))
        u = rebuild_u_field(b, 0, fs, 21)
        assert u[0] == u[-1] == 0.0
        np.testing.assert_allclose(u[1:-1], 1.0)

    def test_identity_at_start(self):
        fs = FrontState(0, -1, 1)
        x = np.linspace(-1, 1, 201)
        b = LineBundle.constant([0.0], x, 1 - np.abs(x))
        u = rebuild_u_field(b, 0, fs, 101)
        np.testing.assert_allclose(u, 1 - np.abs(np.linspace(-1, 1, 101)), atol=1e-12)

    def test_coverage_gap(self):
        fs = FrontState(0, -1, 1)
        b = LineBundle.constant([0.0], np.linspace(-0.5, 0.5, 11), np.ones(11))
        with pytest.raises(CoverageGap):
            rebuild_u_field(b, 0, fs, 21)


class TestTransportWindow:
    def test_seeding_spacing(self):
        fr = linear_fronts(-1.0, 2.0, T=0.1, steps=10)
        xs, ts = seed_positions(fr, 21)
        right = np.sort(xs[xs > 1.0])
        assert right[-1] == pytest.approx(fr[-1].h)
        assert np.max(np.diff(right)) <= (fr[-1].h - fr[-1].g) / 20 + 1e-14

    def test_entering_lines_stay_zero_without_source(self):
        rp = ReactionPair(lambda t, x, u, v: -u, lambda t, x, u, v: 0 * v, "decay")
        fr = linear_fronts(-1.0, 1.0, T=0.2, steps=20)
        n = 21
        v_path = np.tile(np.cos(np.pi * np.linspace(-1, 1, n) / 2), (len(fr), 1))
        x0 = np.linspace(-1, 1, n)
        b = transport_window(rp, fr, v_path, x0, np.cos(np.pi * x0 / 2))
        entered = b.t_x > 0
        np.testing.assert_array_equal(b.samples[:, entered], 0.0)
        inside = ~entered
        np.testing.assert_allclose(b.samples[-1, inside],
                                   np.cos(np.pi * x0 / 2) * math.exp(-0.2), atol=1e-9)

    def test_source_driven_entry(self):
        rp = ReactionPair(lambda t, x, u, v: v - u, lambda t, x, u, v: 0 * v, "forced")
        fr = linear_fronts(0.0, 1.0, T=0.5, steps=50)
        n = 11
        v_path = np.full((len(fr), n), 1.0)
        b = transport_window(rp, fr, v_path, np.linspace(-1, 1, n), np.zeros(n))
        # a line entering at t_x sees u = 1 - exp(-(t - t_x)) up to the lookup blend
        last = b.samples[-1]
        mask = b.t_x > 0.1
        np.testing.assert_allclose(last[mask], 1 - np.exp(-(0.5 - b.t_x[mask])), atol=1e-8)
