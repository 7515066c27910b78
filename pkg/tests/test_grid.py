import numpy as np
import pytest

from freebound.grid import (FrontState, OutOfDomain, ReferenceGrid, d_dy, map_to_physical,
                            map_to_reference, sample_field, stretch_coeffs)


def fs(g, h, gd=0.0, hd=0.0, t=0.0):
    return FrontState(t, g, h, gd, hd)


class TestMaps:
    @pytest.mark.parametrize("g,h,y,x", [(-1, 1, 0.0, 0.0), (-1, 1, 1.0, 1.0), (-2, 4, 0.5, 2.5)])
    def test_to_physical(self, g, h, y, x):
        assert map_to_physical(fs(g, h), y) == x

    @pytest.mark.parametrize("g,h,x,y", [(-1, 1, 0.0, 0.0), (-2, 4, 2.5, 0.5)])
    def test_to_reference(self, g, h, x, y):
        assert map_to_reference(fs(g, h), x) == y

    def test_out_of_domain(self):
        with pytest.raises(OutOfDomain):
            map_to_reference(fs(0, 2), 3.0)
        assert map_to_reference(fs(0, 2), 3.0, strict=False) == 2.0

    def test_endpoints_exact(self):
        f = fs(-0.1, 0.7)
        x = map_to_physical(f, np.linspace(-1, 1, 11))
        assert x[0] == -0.1 and x[-1] == 0.7

    def test_front_order_enforced(self):
        with pytest.raises(ValueError):
            FrontState(0.0, 1.0, 1.0)


class TestStretch:
    def test_symmetric(self):
        xi, zeta = stretch_coeffs(fs(-1, 1, -0.7, 0.7), 0.0)
        assert xi == 1.0 and zeta == 0.0

    def test_frozen(self):
        xi, zeta = stretch_coeffs(fs(-1, 1), np.linspace(-1, 1, 5))
        assert xi == 1.0
        np.testing.assert_array_equal(zeta, 0.0)

    def test_formula(self):
        xi, zeta = stretch_coeffs(fs(-1, 3, -1, 1), 0.5)
        assert xi == 0.5
        assert zeta == pytest.approx(0.25, abs=1e-15)


class TestSampleField:
    def test_constant(self):
        assert sample_field(np.ones(21), fs(-1, 3), 1.0) == pytest.approx(1.0)

    def test_zero_extension(self):
        assert sample_field(np.ones(21), fs(-1, 1), 1.1) == 0.0

    def test_quadratic(self):
        y = np.linspace(-1, 1, 101)
        assert sample_field(y**2, fs(-1, 1), 0.3) == pytest.approx(0.09, abs=1e-6)


class TestReferenceGrid:
    def test_nodes(self):
        g = ReferenceGrid(5)
        np.testing.assert_array_equal(g.y, [-1, -0.5, 0, 0.5, 1])
        assert g.dy == 0.5
        assert g.refined().n == 9

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            ReferenceGrid(3)


def test_chain_rule_order():
    """``xi * dz/dy`` converges to ``dv/dx`` at second order in the interior."""
    f = fs(-0.5, 2.0)
    errs = []
    for n in (21, 41, 81, 161):
        y = np.linspace(-1, 1, n)
        x = map_to_physical(f, y)
        xi, _ = stretch_coeffs(f, y)
        dv = xi * d_dy(np.sin(x), 2.0 / (n - 1))
        errs.append(np.max(np.abs(dv - np.cos(x))[1:-1]))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8)
