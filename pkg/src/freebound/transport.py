"""The non-diffusing species along fixed physical abscissae.

Each abscissa ``x`` carries the scalar ODE ``u_t = f1(t, x, u, v(t, x))``
started at its entry time ``t_x`` (the first time the moving domain covers
``x``) from ``u0(x)`` if ``x`` was inside at the start, else from zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .grid import FrontState, map_to_physical
from .model import ModelError, ReactionPair, eval_reactions

INITIAL, LEFT, RIGHT, NEVER = "initial", "left-entered", "right-entered", "never"


class NonMonotoneFronts(ValueError):
    """The front path cannot be inverted."""


class CoverageGap(RuntimeError):
    """Characteristic lines leave part of the domain unresolved."""


@dataclass(frozen=True)
class EntryTime:
    t_x: float
    flag: str


def _front_arrays(front_path):
    if isinstance(front_path, tuple) and len(front_path) == 3:
        return (np.asarray(a, dtype=float) for a in front_path)
    t = np.array([fs.t for fs in front_path])
    g = np.array([fs.g for fs in front_path])
    h = np.array([fs.h for fs in front_path])
    return t, g, h


def _check_monotone(g, h):
    if np.any(np.diff(h) < 0) or np.any(np.diff(g) > 0):
        raise NonMonotoneFronts("front path is not monotone; entry times undefined")


def _first_crossing(times, front, x):
    """First time the increasing ``front`` reaches ``x`` (linear between levels)."""
    k = np.searchsorted(front, x, side="left")
    k = np.clip(k, 1, len(front) - 1)
    f0, f1 = front[k - 1], front[k]
    t0, t1 = times[k - 1], times[k]
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = np.where(f1 > f0, (x - f0) / (f1 - f0), 1.0)
    return t0 + np.clip(lam, 0.0, 1.0) * (t1 - t0)


def entry_times(front_path, x):
    """Vectorised entry times; returns ``(t_x, flags)`` with ``t_x = nan`` if never entered."""
    t, g, h = _front_arrays(front_path)
    _check_monotone(g, h)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tx = np.full(x.shape, np.nan)
    flags = np.full(x.shape, NEVER, dtype=object)
    inside = (x >= g[0]) & (x <= h[0])
    tx[inside] = t[0]
    flags[inside] = INITIAL
    right = (x > h[0]) & (x <= h[-1])
    if right.any():
        tx[right] = _first_crossing(t, h, x[right])
        flags[right] = RIGHT
    left = (x < g[0]) & (x >= g[-1])
    if left.any():
        # -g is increasing
        tx[left] = _first_crossing(t, -g, -x[left])
        flags[left] = LEFT
    return tx, flags


def entry_time(front_path, x: float) -> EntryTime:
    """Entry time of a single abscissa."""
    tx, flags = entry_times(front_path, [x])
    return EntryTime(float(tx[0]), str(flags[0]))


@dataclass
class CharacteristicLine:
    x: float
    t_x: float
    u_init: float
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    samples: np.ndarray = field(default_factory=lambda: np.empty(0))
    clipped: float = 0.0


def rk4_lines(rp: ReactionPair, x, u, t_start, t_end, v_lookup):
    """One RK4 step per line from ``t_start`` to ``t_end`` (arrays, per line)."""
    h = t_end - t_start

    def rhs(t, uu):
        return eval_reactions(rp, t, x, uu, v_lookup(t, x))[0]

    k1 = rhs(t_start, u)
    k2 = rhs(t_start + 0.5 * h, u + 0.5 * h * k1)
    k3 = rhs(t_start + 0.5 * h, u + 0.5 * h * k2)
    k4 = rhs(t_end, u + h * k3)
    return u + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_characteristic(line: CharacteristicLine, v_lookup: Callable, rp: ReactionPair,
                             window, dt: float) -> CharacteristicLine:
    """Fill ``line.samples`` on the global time grid of ``window``.

    Samples before ``t_x`` are zero (the zero extension); the first sample at
    or after ``t_x`` is reached by a partial step from ``t_x``.
    """
    t0, t1 = window
    nsteps = max(1, int(round((t1 - t0) / dt)))
    times = np.linspace(t0, t1, nsteps + 1)
    samples = np.zeros(nsteps + 1)
    x = np.array([line.x])
    u = np.array([line.u_init], dtype=float)
    clipped = 0.0
    started = False
    for k in range(nsteps + 1):
        if not started:
            if times[k] < line.t_x:
                continue
            started = True
            t_prev = line.t_x
        if times[k] > t_prev:
            try:
                u = rk4_lines(rp, x, u, np.array([t_prev]), np.array([times[k]]), v_lookup)
            except ModelError as exc:
                raise ModelError(f"characteristic at x={line.x}: {exc}") from exc
            if u[0] < 0:
                clipped += -u[0]
                u[0] = 0.0
        samples[k] = u[0]
        t_prev = times[k]
    line.times, line.samples, line.clipped = times, samples, clipped
    return line


class StepLookup:
    """``v(t, x)`` within one step, blending the two end levels in reference coordinates."""

    def __init__(self, fs0: FrontState, fs1: FrontState, z0, z1, p0=None):
        self.fs0, self.fs1 = fs0, fs1
        y = np.linspace(-1.0, 1.0, len(z0))
        # the end level of one step is the start level of the next
        self.p0 = PchipInterpolator(y, z0) if p0 is None else p0
        self.p1 = PchipInterpolator(y, z1)

    def __call__(self, t, x):
        dt = self.fs1.t - self.fs0.t
        lam = np.clip((np.asarray(t) - self.fs0.t) / dt, 0.0, 1.0) if dt > 0 else np.zeros_like(x)
        g = (1 - lam) * self.fs0.g + lam * self.fs1.g
        h = (1 - lam) * self.fs0.h + lam * self.fs1.h
        y = (2.0 * x - g - h) / (h - g)
        out = np.zeros(np.shape(x))
        inside = (y >= -1.0) & (y <= 1.0)
        if np.any(inside):
            yi = y[inside]
            lam_i = np.broadcast_to(lam, np.shape(x))[inside]
            out[inside] = (1 - lam_i) * self.p0(yi) + lam_i * self.p1(yi)
        return out


class LineBundle:
    """All characteristic lines of one window, advanced together.

    ``samples[k, i]`` is ``u`` on line ``i`` at window level ``k`` (zero before
    the line's entry time).
    """

    def __init__(self, times, x, t_x, u_init):
        self.times = np.asarray(times, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.t_x = np.asarray(t_x, dtype=float)
        self.u_init = np.asarray(u_init, dtype=float)
        self.samples = np.zeros((len(self.times), len(self.x)))
        at0 = self.t_x <= self.times[0]
        self.samples[0, at0] = self.u_init[at0]
        self.clipped = 0.0
        self.frozen = False
        self._cache = {}

    @classmethod
    def constant(cls, times, x, u):
        """Lines frozen at ``u`` for all levels (the constant-in-time guess)."""
        b = cls(times, x, np.full(len(x), times[0]), u)
        b.samples[:] = np.asarray(u, dtype=float)[None, :]
        b.frozen = True
        return b

    def active(self, k: int):
        return self.t_x <= self.times[k] + 1e-14 * max(1.0, abs(self.times[k]))

    def interpolant(self, k: int):
        """Sorted active abscissae and values at level ``k``."""
        act = self.active(k)
        xs = self.x[act]
        us = self.samples[k, act]
        order = np.argsort(xs, kind="stable")
        xs, us = xs[order], us[order]
        keep = np.concatenate(([True], np.diff(xs) > 1e-13))
        return xs[keep], us[keep]

    def _level(self, k: int):
        # samples are final once the bundle is built; cache per level
        key = 0 if self.frozen else k
        if key not in self._cache:
            xs, us = self.interpolant(key)
            p = PchipInterpolator(xs, us) if xs.size > 1 else None
            self._cache[key] = (xs, us, p)
        return self._cache[key]

    def evaluate(self, k: int, xq):
        """Zero-extended monotone interpolation of level ``k`` at ``xq``."""
        xs, us, p = self._level(k)
        xq = np.asarray(xq, dtype=float)
        out = np.zeros_like(xq)
        if xs.size == 0:
            return out
        inside = (xq >= xs[0]) & (xq <= xs[-1])
        if p is None:
            out[inside] = us[0]
        elif np.any(inside):
            out[inside] = p(xq[inside])
        return out

    __call__ = evaluate


def seed_positions(fronts: Sequence[FrontState], n: int):
    """Abscissae and entry times of lines seeded along the fronts.

    Each step seeds enough lines between the old and new front position that
    neighbours are no further apart than the physical grid spacing; the last
    line of each step sits exactly on the new front.
    """
    xs, ts = [], []
    for fs0, fs1 in zip(fronts[:-1], fronts[1:]):
        spacing = (fs1.h - fs1.g) / (n - 1)
        for a, b in ((fs0.h, fs1.h), (fs0.g, fs1.g)):
            if b == a:
                continue
            m = int(np.ceil(abs(b - a) / spacing - 1e-12))
            m = max(m, 1)
            frac = np.arange(1, m + 1) / m
            xs.append(a + frac * (b - a))
            ts.append(fs0.t + frac * (fs1.t - fs0.t))
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ts)


def transport_window(rp: ReactionPair, fronts: Sequence[FrontState], v_path, x_init, u_init,
                     lock_fronts: bool = False) -> LineBundle:
    """Integrate all lines of a window along the given fronts and ``v`` path.

    ``x_init``/``u_init`` are the lines present at the window start (the
    initial data or the re-based field). Lines entering through the fronts
    start from zero.
    """
    times = np.array([fs.t for fs in fronts])
    n = v_path.shape[1]
    if lock_fronts:
        sx, st = np.empty(0), np.empty(0)
    else:
        sx, st = seed_positions(fronts, n)
    x = np.concatenate([np.asarray(x_init, float), sx])
    t_x = np.concatenate([np.full(len(x_init), times[0]), st])
    u0 = np.concatenate([np.asarray(u_init, float), np.zeros(len(sx))])
    bundle = LineBundle(times, x, t_x, u0)

    u = u0.copy()
    carry = None
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        live = bundle.t_x < t1 - 1e-14 * max(1.0, abs(t1))
        carry = None if not np.any(live) else carry
        if np.any(live):
            lookup = StepLookup(fronts[k], fronts[k + 1], v_path[k], v_path[k + 1], carry)
            carry = lookup.p1
            start = np.maximum(bundle.t_x[live], t0)
            unew = rk4_lines(rp, bundle.x[live], u[live], start, np.full(start.shape, t1), lookup)
            neg = unew < 0
            if neg.any():
                bundle.clipped += float(-unew[neg].sum())
                unew[neg] = 0.0
            u[live] = unew
        # lines seeded exactly at t1 carry zero
        bundle.samples[k + 1] = np.where(bundle.t_x <= t1 + 1e-14 * max(1.0, abs(t1)), u, 0.0)
    return bundle


def rebuild_u_field(bundle: LineBundle, k: int, fs: FrontState, n: int, check_coverage: bool = True):
    """``u`` on the reference grid at window level ``k``; exact zeros at ``y = +-1``."""
    y = np.linspace(-1.0, 1.0, n)
    xq = map_to_physical(fs, y)
    if check_coverage:
        xs, _ = bundle.interpolant(k)
        spacing = (fs.h - fs.g) / (n - 1)
        tol = 1e-9 * max(1.0, abs(fs.g), abs(fs.h))
        if xs.size < 2 or xs[0] > fs.g + tol or xs[-1] < fs.h - tol:
            raise CoverageGap(f"lines do not cover [{fs.g}, {fs.h}] at t={fs.t}")
        gap = float(np.max(np.diff(xs)))
        if gap > 2.0 * spacing * (1 + 1e-9):
            raise CoverageGap(f"line gap {gap:.3g} exceeds twice the grid spacing {spacing:.3g}")
    out = bundle.evaluate(k, xq)
    out[0] = out[-1] = 0.0
    return out
