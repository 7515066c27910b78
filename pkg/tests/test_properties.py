"""Property-based checks of the invariants each module promises."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from freebound.cli import fmt
from freebound.fixedpoint import WindowAttempt, WindowUnderflow, adapt_window
from freebound.grid import FrontState, map_to_physical, map_to_reference, stretch_coeffs
from freebound.model import (InitialData, ReactionPair, builtin_catalog, check_condition_I,
                             cosine_data, estimate_lipschitz, validate_initial_data)
from freebound.transport import entry_times

finite = dict(allow_nan=False, allow_infinity=False)


@st.composite
def fronts(draw):
    g = draw(st.floats(-50, 50, **finite))
    length = draw(st.floats(1e-3, 100, **finite))
    return FrontState(0.0, g, g + length, draw(st.floats(-5, 0, **finite)),
                      draw(st.floats(0, 5, **finite)))


@settings(max_examples=1000, deadline=None)
@given(fronts(), st.floats(-1, 1, **finite))
def test_roundtrip(fs, y):
    scale = max(1.0, abs(fs.g), abs(fs.h)) / (fs.h - fs.g)
    assert abs(map_to_reference(fs, map_to_physical(fs, y)) - y) <= 1e-13 * max(1.0, scale)


@given(fronts())
def test_xi_times_length(fs):
    xi, _ = stretch_coeffs(fs, 0.0)
    assert abs(xi * (fs.h - fs.g) - 2.0) <= 1e-14


@given(fronts())
def test_zeta_endpoints_are_front_velocities(fs):
    # zeta(+-1) * (h-g)/2 reproduces the front velocities
    _, z = stretch_coeffs(fs, np.array([-1.0, 1.0]))
    np.testing.assert_allclose(z * (fs.h - fs.g) / 2, [fs.gdot, fs.hdot], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3, **finite), st.floats(-3, 3, **finite), st.floats(-3, 3, **finite))
def test_lipschitz_exact_on_linear(a, b, c):
    rp = ReactionPair(lambda t, x, u, v: a * u + b * v, lambda t, x, u, v: c * x + 0 * u, "lin")
    L1, L1s = estimate_lipschitz(rp, (1.0, 2.0, 3.0, 3.0), n_samples=9)
    assert abs(L1 - max(abs(a), abs(b))) <= 1e-12 * max(1.0, abs(a), abs(b))
    assert abs(L1s - abs(c)) <= 1e-12 * max(1.0, abs(c))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["epidemic", "west-nile", "cooperative", "custom-polynomial"]),
       st.integers(2, 9))
def test_lipschitz_monotone_under_nested_refinement(name, n):
    rp = builtin_catalog(name)
    box = (1.0, 1.0, 2.0, 2.0)
    coarse = estimate_lipschitz(rp, box, n_samples=n)
    fine = estimate_lipschitz(rp, box, n_samples=2 * n - 1)
    assert fine[0] >= coarse[0] - 1e-12 and fine[1] >= coarse[1] - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1e3, **finite), st.floats(1e-2, 1e2, **finite))
def test_cosine_family_accepted(amp, h0):
    rep = validate_initial_data(cosine_data(h0, amp, amp))
    assert rep.ok, rep.messages


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1e3, **finite), st.floats(1e-2, 1e2, **finite))
def test_flat_boundary_rejected(amp, h0):
    def f(x):
        return amp * (1 - (np.asarray(x) / h0) ** 2) ** 2

    rep = validate_initial_data(InitialData.from_functions(h0, f, f))
    assert not rep.checks["v0_slope_left_positive"]
    assert not rep.checks["v0_slope_right_negative"]


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 5))
def test_condition_I_epidemic_and_west_nile(p1, p2, p3, p4):
    assert check_condition_I(builtin_catalog("epidemic", {"a": p1, "b": p2, "c": p3, "gamma": p4}))
    assert check_condition_I(builtin_catalog("west-nile", {"r1": p1, "r2": p2, "a1": p3, "a2": p4}))


@given(st.lists(st.tuples(st.floats(1e-4, 1.0), st.booleans(), st.integers(1, 30)), min_size=1,
                max_size=8),
       st.floats(1e-5, 2.0))
def test_adapt_window_clamped(hist, remainder):
    history = [WindowAttempt(*h) for h in hist]
    try:
        w = adapt_window(history, remainder)
    except WindowUnderflow:
        assert not history[-1].converged and 0.5 * history[-1].length < 1e-6
        return
    assert w <= remainder and (w >= 1e-6 or w == remainder)


@given(st.lists(st.floats(0, 1, **finite), min_size=2, max_size=20),
       st.lists(st.floats(-3, 3, **finite), min_size=1, max_size=10))
def test_entry_times_ordered_by_distance(steps, xs):
    h = 1.0 + np.cumsum([0.0] + steps)
    g = -h
    t = np.arange(len(h), dtype=float)
    tx, _ = entry_times((t, g, h), xs)
    x = np.asarray(xs)
    ok = ~np.isnan(tx)
    order = np.argsort(np.abs(x[ok]))
    assert np.all(np.diff(tx[ok][order]) >= -1e-12)


@given(st.floats(**finite))
def test_fmt_roundtrips(x):
    assert float(fmt(x)) == x
    assert "," not in fmt(x)
