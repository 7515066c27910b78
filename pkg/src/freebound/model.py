"""Reaction pairs, initial data and problem definitions.

A reaction pair ``(f1, f2)`` is a pair of vectorised callables with the
signature ``f(t, x, u, v)``. ``f1`` drives the non-diffusing species ``u``
and ``f2`` the diffusing species ``v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

RateFn = Callable[..., np.ndarray]


class ModelError(ValueError):
    """Raised when a reaction pair, initial data or problem is inadmissible."""


@dataclass(frozen=True)
class ReactionPair:
    """Reaction terms ``f1(t, x, u, v)`` and ``f2(t, x, u, v)``.

    ``k0`` and ``theta`` carry the threshold recipe for static caps
    (``f1 < 0`` for ``u > k0``; ``f2 < 0`` for ``u <= eta, v >= theta(eta)``)
    when the model admits one.
    """

    f1: RateFn
    f2: RateFn
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    k0: Optional[float] = None
    theta: Optional[Callable[[float], float]] = None
    notes: tuple[str, ...] = ()

    def __call__(self, t, x, u, v):
        return eval_reactions(self, t, x, u, v)


def eval_reactions(rp: ReactionPair, t, x, u, v):
    """Evaluate ``(f1, f2)``; non-finite output raises naming the point."""
    t, x, u, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, x, u, v)))
    r1 = np.broadcast_to(np.asarray(rp.f1(t, x, u, v), dtype=float), t.shape)
    r2 = np.broadcast_to(np.asarray(rp.f2(t, x, u, v), dtype=float), t.shape)
    bad = ~(np.isfinite(r1) & np.isfinite(r2))
    if bad.any():
        i = np.flatnonzero(bad.ravel())[0]
        pt = tuple(float(a.ravel()[i]) for a in (t, x, u, v))
        raise ModelError(
            f"reaction {rp.name!r} is not finite at (t, x, u, v) = {pt}"
        )
    if r1.ndim == 0:
        return float(r1), float(r2)
    return r1, r2


def _lattice(lo, hi, n):
    return np.linspace(lo, hi, max(int(n), 2))


def estimate_lipschitz(rp: ReactionPair, box, n_samples: int = 64, n_tx: int = 8):
    """Sampled Lipschitz constants of a reaction pair on a box.

    ``box = (tau, l, k1, k2)`` spans ``[0, tau] x [-l, l] x [0, k1] x [0, k2]``.
    Returns ``(L1, L1star)``: the largest adjacent difference quotient in
    ``(u, v)`` (sup of the two partial quotients, which is the Lipschitz
    constant for the ``|du| + |dv|`` metric) and in ``x``.

    ``n_samples`` points are used on the axis being differenced and the two
    species axes; the remaining ``(t, x)`` axes use ``n_tx`` points. Nested
    refinement (``n -> 2n - 1``) never lowers an estimate.
    """
    tau, ell, k1, k2 = (float(b) for b in box)
    if min(tau, ell, k1, k2) <= 0:
        raise ModelError(f"box edges must be positive, got {box}")
    if n_samples < 2:
        raise ModelError("n_samples must be >= 2")

    ts = _lattice(0.0, tau, n_tx)
    xs = _lattice(-ell, ell, n_tx)
    us = _lattice(0.0, k1, n_samples)
    vs = _lattice(0.0, k2, n_samples)
    T, X, U, V = np.meshgrid(ts, xs, us, vs, indexing="ij")
    L1 = 0.0
    for f in eval_reactions(rp, T, X, U, V):
        du = np.abs(np.diff(f, axis=2)) / np.diff(us)[None, None, :, None]
        dv = np.abs(np.diff(f, axis=3)) / np.diff(vs)[None, None, None, :]
        L1 = max(L1, float(du.max()), float(dv.max()))

    xs = _lattice(-ell, ell, n_samples)
    us = _lattice(0.0, k1, n_tx)
    vs = _lattice(0.0, k2, n_tx)
    T, X, U, V = np.meshgrid(ts, xs, us, vs, indexing="ij")
    L1star = 0.0
    for f in eval_reactions(rp, T, X, U, V):
        dx = np.abs(np.diff(f, axis=1)) / np.diff(xs)[None, :, None, None]
        L1star = max(L1star, float(dx.max()))
    return L1, L1star


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialData:
    """Initial densities on ``[-h0, h0]`` as uniform samples.

    ``u0_fn`` / ``v0_fn`` keep the generating closures when available so the
    solvers can evaluate them exactly at their own nodes.
    """

    h0: float
    u0: np.ndarray
    v0: np.ndarray
    u0_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    v0_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "table"

    def __post_init__(self):
        if not (self.h0 > 0 and math.isfinite(self.h0)):
            raise ModelError(f"h0 must be > 0, got {self.h0}")
        u0 = np.asarray(self.u0, dtype=float)
        v0 = np.asarray(self.v0, dtype=float)
        if u0.ndim != 1 or u0.size < 3 or u0.shape != v0.shape:
            raise ModelError("u0 and v0 must be 1-D samples of equal length >= 3")
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "v0", v0)

    @classmethod
    def from_functions(cls, h0, u0, v0, n: int = 801, label: str = "closure"):
        x = np.linspace(-h0, h0, n)
        return cls(h0, np.asarray(u0(x), float), np.asarray(v0(x), float), u0, v0, label)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.h0, self.h0, self.u0.size)

    @property
    def dx(self) -> float:
        return 2.0 * self.h0 / (self.u0.size - 1)

    @property
    def L0(self) -> float:
        return float(np.max(np.abs(np.diff(self.u0))) / self.dx)

    def _eval(self, fn, samples, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= self.h0
        out = np.zeros_like(x)
        if fn is not None:
            out[inside] = np.asarray(fn(x[inside]), dtype=float)
        else:
            out[inside] = PchipInterpolator(self.x, samples)(x[inside])
        return out

    def u0_at(self, x):
        """``u0`` at arbitrary abscissae, zero outside ``[-h0, h0]``."""
        return self._eval(self.u0_fn, self.u0, x)

    def v0_at(self, x):
        return self._eval(self.v0_fn, self.v0, x)

    def v0_slopes(self):
        """``(min v0' on [0, h0], max v0' on [-h0, 0])`` from the samples."""
        dv = np.gradient(self.v0, self.dx, edge_order=2)
        x = self.x
        return float(dv[x >= 0].min()), float(dv[x <= 0].max())


@dataclass
class ValidationReport:
    checks: dict[str, bool]
    L0: float
    messages: list[str]
    boundary_slopes: tuple[float, float]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _end_slope(f, dx, side):
    # second-order one-sided derivative at the left (side=-1) or right end
    if side < 0:
        return (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dx)
    return (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dx)


def _strict_slope(f, dx, side, scale):
    """One-sided slope and whether it is resolved as strictly nonzero.

    A genuine nonzero slope gives the same estimate at spacing ``dx`` and
    ``2 dx`` up to O(dx^2); a vanishing slope produces an estimate that
    itself scales like dx^2 and so changes by a factor ~4.
    """
    s1 = _end_slope(f, dx, side)
    if len(f) < 6:
        return s1, abs(s1) > 1e-10 * scale
    s2 = _end_slope(f[::2] if side < 0 else f[::-1][::2][::-1], 2 * dx, side)
    resolved = abs(s1) > 1e-10 * scale and abs(s2 - s1) <= 0.5 * abs(s1)
    return s1, resolved


def validate_initial_data(init: InitialData) -> ValidationReport:
    """Check the hypotheses on ``(u0, v0)`` and compute ``L0``."""
    u0, v0, dx = init.u0, init.v0, init.dx
    scale = max(1.0, float(np.max(np.abs(u0))), float(np.max(np.abs(v0))))
    zero_tol = 1e-12 * scale
    checks: dict[str, bool] = {}
    msgs: list[str] = []

    checks["finite"] = bool(np.all(np.isfinite(u0)) and np.all(np.isfinite(v0)))
    checks["u0_endpoint_zero"] = abs(u0[0]) <= zero_tol and abs(u0[-1]) <= zero_tol
    checks["v0_endpoint_zero"] = abs(v0[0]) <= zero_tol and abs(v0[-1]) <= zero_tol
    checks["u0_interior_positive"] = bool(np.all(u0[1:-1] > 0))
    checks["v0_interior_positive"] = bool(np.all(v0[1:-1] > 0))

    vscale = float(np.max(np.abs(v0))) / init.h0
    sl, ok_l = _strict_slope(v0, dx, -1, vscale)
    sr, ok_r = _strict_slope(v0, dx, +1, vscale)
    checks["v0_slope_left_positive"] = bool(ok_l and sl > 0)
    checks["v0_slope_right_negative"] = bool(ok_r and sr < 0)

    for k, passed in checks.items():
        if not passed:
            msgs.append(f"initial data check failed: {k}")
    return ValidationReport(checks, init.L0, msgs, (float(sl), float(sr)))


def cosine_data(h0: float, amp_u: float = 1.0, amp_v: float = 1.0, n: int = 801) -> InitialData:
    """``u0 = A_u cos(pi x / 2 h0)``, ``v0 = A_v cos(pi x / 2 h0)``."""
    def u0(x):
        return amp_u * np.cos(np.pi * np.asarray(x) / (2 * h0))

    def v0(x):
        return amp_v * np.cos(np.pi * np.asarray(x) / (2 * h0))

    return InitialData.from_functions(h0, u0, v0, n, label="cosine")


def parabola_data(h0: float, amp_u: float = 1.0, amp_v: float = 1.0, n: int = 801) -> InitialData:
    """``A (1 - (x/h0)^2)`` for both species."""
    def u0(x):
        return amp_u * (1 - (np.asarray(x) / h0) ** 2)

    def v0(x):
        return amp_v * (1 - (np.asarray(x) / h0) ** 2)

    return InitialData.from_functions(h0, u0, v0, n, label="parabola")


INITIAL_FAMILIES = {"cosine": cosine_data, "parabola": parabola_data}


@dataclass(frozen=True)
class ProblemSpec:
    reactions: ReactionPair
    d: float
    mu: float
    beta: float
    init: InitialData
    t_final: float

    def __post_init__(self):
        for name in ("d", "mu", "beta"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ModelError(f"{name} must be > 0, got {val}")
        if not (math.isfinite(self.t_final) and self.t_final >= 0):
            raise ModelError(f"t_final must be finite and >= 0, got {self.t_final}")

    @property
    def h0(self) -> float:
        return self.init.h0

    @property
    def symmetric(self) -> bool:
        """True when the problem is invariant under ``x -> -x``."""
        if self.mu != self.beta:
            return False
        if not (np.allclose(self.init.u0, self.init.u0[::-1], rtol=0, atol=1e-14)
                and np.allclose(self.init.v0, self.init.v0[::-1], rtol=0, atol=1e-14)):
            return False
        return not self.reactions.params.get("x_dependent", False)


# ---------------------------------------------------------------------------
# Built-in catalog
# ---------------------------------------------------------------------------


def _merge(defaults: dict, params: Optional[Mapping]) -> dict:
    out = dict(defaults)
    for k, v in (params or {}).items():
        if k not in defaults:
            raise ModelError(f"unknown parameter {k!r}; allowed: {sorted(defaults)}")
        out[k] = v
    return out


def _require_nonneg(p: Mapping, keys, strict=()):
    for k in keys:
        if p[k] < 0 or not math.isfinite(p[k]):
            raise ModelError(f"parameter {k} must be >= 0, got {p[k]}")
    for k in strict:
        if p[k] <= 0:
            raise ModelError(f"parameter {k} must be > 0, got {p[k]}")


def _epidemic(p):
    a, b, c, gamma = (float(p[k]) for k in ("a", "b", "c", "gamma"))
    family = p["G"]
    _require_nonneg(p, ("a", "b", "c", "gamma"), strict=("a", "b", "c"))
    if family == "linear":
        def G(v):
            return gamma * v
        k0 = None
    elif family == "saturating":
        if not gamma < a * c / b:
            raise ModelError(f"saturating G needs gamma < a*c/b = {a * c / b}, got {gamma}")

        def G(v):
            return gamma * v / (1.0 + v)
        k0 = gamma / a
    else:
        raise ModelError(f"G must be 'linear' or 'saturating', got {family!r}")

    def f1(t, x, u, v):
        return G(v) - a * u

    def f2(t, x, u, v):
        return b * u - c * v

    return ReactionPair(
        f1, f2, "epidemic", dict(p), k0=k0,
        theta=lambda eta: b * eta / c,
        notes=(f"G family: {family}",),
    )


def _west_nile(p):
    _require_nonneg(p, ("r1", "r2", "a1", "a2", "b1", "c"), strict=("c", "a1"))
    r1, r2, a1, a2, b1, c = (float(p[k]) for k in ("r1", "r2", "a1", "a2", "b1", "c"))

    def f1(t, x, u, v):
        return r1 * (a1 - u) * v - b1 * u

    def f2(t, x, u, v):
        return r2 * (a2 - v) * u - c * v

    return ReactionPair(f1, f2, "west-nile", dict(p), k0=a1, theta=lambda eta: r2 * a2 * eta / c)


def _cooperative(p):
    _require_nonneg(p, ("a", "b", "c", "r", "s"), strict=("a", "s"))
    a, b, c, r, s = (float(p[k]) for k in ("a", "b", "c", "r", "s"))

    def f1(t, x, u, v):
        return -a * u + b * v

    def f2(t, x, u, v):
        return c * u + v * (r - s * v)

    # f1 < 0 needs v bounded, so no static k0
    return ReactionPair(f1, f2, "cooperative", dict(p))


def _poly(terms):
    terms = [(float(cf), int(i), int(j)) for cf, i, j in terms]
    for cf, i, j in terms:
        if i < 0 or j < 0 or not math.isfinite(cf):
            raise ModelError(f"bad polynomial term {(cf, i, j)}")

    def f(t, x, u, v):
        out = np.zeros(np.broadcast(u, v).shape)
        for cf, i, j in terms:
            out = out + cf * u**i * v**j
        return out

    return f


def _custom_polynomial(p):
    f1 = _poly(p["f1"])
    f2 = _poly(p["f2"])
    return ReactionPair(f1, f2, "custom-polynomial", {"f1": list(p["f1"]), "f2": list(p["f2"])},
                        k0=p.get("k0"), theta=None)


CATALOG_DEFAULTS = {
    "epidemic": {"a": 1.0, "b": 1.0, "c": 1.0, "gamma": 1.0, "G": "linear"},
    "west-nile": {"r1": 1.0, "r2": 1.0, "a1": 1.0, "a2": 1.0, "b1": 1.0, "c": 1.0},
    "cooperative": {"a": 1.0, "b": 0.5, "c": 0.5, "r": 0.5, "s": 1.0},
    # logistic pair by default: f1 = u(1-u), f2 = v(1-v); terms are (coef, pow_u, pow_v)
    "custom-polynomial": {
        "f1": [(1.0, 1, 0), (-1.0, 2, 0)],
        "f2": [(1.0, 0, 1), (-1.0, 0, 2)],
        "k0": None,
    },
}

_BUILDERS = {
    "epidemic": _epidemic,
    "west-nile": _west_nile,
    "cooperative": _cooperative,
    "custom-polynomial": _custom_polynomial,
}


def builtin_catalog(name: str, params: Optional[Mapping] = None) -> ReactionPair:
    """Return one of the catalogued reaction pairs with ``params`` overrides."""
    if name not in _BUILDERS:
        raise ModelError(f"unknown model {name!r}; choose from {sorted(_BUILDERS)}")
    return _BUILDERS[name](_merge(CATALOG_DEFAULTS[name], params))


def check_condition_I(rp: ReactionPair, box=(1.0, 2.0, 2.0, 2.0), n: int = 17) -> bool:
    """Sampled sign check: ``f1(t,x,0,v) >= 0`` and ``f2(t,x,u,0) >= 0``."""
    tau, ell, k1, k2 = box
    ts, xs = _lattice(0, tau, 5), _lattice(-ell, ell, 5)
    T, X, S = np.meshgrid(ts, xs, _lattice(0, max(k1, k2), n), indexing="ij")
    f1, _ = eval_reactions(rp, T, X, 0.0, S)
    _, f2 = eval_reactions(rp, T, X, S, 0.0)
    return bool(np.all(f1 >= 0) and np.all(f2 >= 0))


def cross_partials(rp: ReactionPair, umax: float, vmax: float, n: int = 33, eps: float = 1e-6):
    """Finite-difference ``(df1/dv, df2/du)`` on an ``n x n`` lattice at t = x = 0."""
    U, V = np.meshgrid(_lattice(0, umax, n), _lattice(0, vmax, n), indexing="ij")
    f1p, _ = eval_reactions(rp, 0.0, 0.0, U, V + eps)
    f1m, _ = eval_reactions(rp, 0.0, 0.0, U, np.maximum(V - eps, 0))
    _, f2p = eval_reactions(rp, 0.0, 0.0, U + eps, V)
    _, f2m = eval_reactions(rp, 0.0, 0.0, np.maximum(U - eps, 0), V)
    d1 = (f1p - f1m) / (V + eps - np.maximum(V - eps, 0))
    d2 = (f2p - f2m) / (U + eps - np.maximum(U - eps, 0))
    return d1, d2


def is_quasimonotone(rp: ReactionPair, umax: float, vmax: float, tol: float = 1e-10) -> bool:
    d1, d2 = cross_partials(rp, umax, vmax)
    return bool(d1.min() >= -tol and d2.min() >= -tol)


def is_autonomous(rp: ReactionPair, umax: float = 2.0, vmax: float = 2.0, n: int = 7) -> bool:
    """Sampled check that the reactions ignore ``(t, x)``."""
    U, V = np.meshgrid(_lattice(0, umax, n), _lattice(0, vmax, n), indexing="ij")
    ref = eval_reactions(rp, 0.0, 0.0, U, V)
    for t, x in ((0.7, 0.0), (0.0, 1.3), (2.1, -0.9)):
        got = eval_reactions(rp, t, x, U, V)
        for a, b in zip(ref, got):
            if not np.allclose(a, b, rtol=1e-13, atol=1e-13):
                return False
    return True
