"""A priori bounds: majorant ODE, static caps, front-speed caps and audits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .model import (ProblemSpec, ReactionPair, eval_reactions, is_autonomous,
                    is_quasimonotone)
from .trajectory import Trajectory

BLOWUP_LEVEL = 1e8


class BoundsUnavailable(ValueError):
    """The majorant path cannot be used for this reaction pair."""


@dataclass
class MajorantPath:
    t: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    horizon: float
    blowup_time: Optional[float] = None
    _sol: object = None

    def __call__(self, t):
        """``(phi(t), psi(t))`` from the dense output."""
        y = self._sol(np.asarray(t, dtype=float))
        return y[0], y[1]

    @property
    def M(self) -> float:
        return float(self.phi.max())

    @property
    def N(self) -> float:
        return float(self.psi.max())


def majorant_ode(rp: ReactionPair, init, horizon: float, check: bool = True,
                 rtol: float = 1e-11, atol: float = 1e-13) -> MajorantPath:
    """Integrate ``phi' = f1(phi, psi)``, ``psi' = f2(phi, psi)`` on ``[0, horizon]``.

    Raises :class:`BoundsUnavailable` if the pair is not autonomous or not
    quasimonotone increasing on the sampled box.
    """
    phi0, psi0 = (float(a) for a in init)
    if check:
        if not is_autonomous(rp):
            raise BoundsUnavailable("reactions depend on (t, x)")
        box = (2.0 * max(phi0, 1.0), 2.0 * max(psi0, 1.0))
        if not is_quasimonotone(rp, *box):
            raise BoundsUnavailable("reactions are not quasimonotone increasing")

    def rhs(t, y):
        return np.array(eval_reactions(rp, 0.0, 0.0, y[0], y[1]))

    def blowup(t, y):
        return BLOWUP_LEVEL - max(abs(y[0]), abs(y[1]))
    blowup.terminal = True

    if horizon <= 0:
        def const(s):
            return np.stack([np.full(np.shape(s), phi0), np.full(np.shape(s), psi0)])
        return MajorantPath(np.array([0.0]), np.array([phi0]), np.array([psi0]), 0.0, None, const)
    sol = solve_ivp(rhs, (0.0, horizon), [phi0, psi0], method="RK45", rtol=rtol, atol=atol,
                    dense_output=True, events=blowup)
    blow = float(sol.t_events[0][0]) if sol.t_events[0].size else None
    return MajorantPath(sol.t, sol.y[0], sol.y[1], horizon, blow, sol.sol)


@dataclass
class StaticCaps:
    eta: float
    v_cap: float
    verified: bool
    notes: list = field(default_factory=list)


def static_caps(rp: ReactionPair, max_u0: float, max_v0: float,
                k0: Optional[float] = None, Theta: Optional[Callable] = None,
                n: int = 41) -> StaticCaps:
    """Threshold caps ``eta = max u0 + k0`` and ``max v0 + Theta(eta)``.

    The sign conditions behind them are spot-checked by sampling.
    """
    k0 = rp.k0 if k0 is None else k0
    Theta = rp.theta if Theta is None else Theta
    if k0 is None or Theta is None:
        raise BoundsUnavailable("no threshold k0 / Theta available for this model")
    eta = max_u0 + k0
    th = float(Theta(eta))
    v_cap = max_v0 + th
    notes = []
    verified = True

    U, V = np.meshgrid(np.linspace(k0, 4 * (k0 + 1), n)[1:], np.linspace(0, 4 * (v_cap + 1), n),
                       indexing="ij")
    f1, _ = eval_reactions(rp, 0.0, 0.0, U, V)
    if not np.all(f1 < 0):
        verified = False
        notes.append("f1 >= 0 found above k0")
    U, V = np.meshgrid(np.linspace(0, eta, n), np.linspace(th, 4 * (th + 1), n), indexing="ij")
    _, f2 = eval_reactions(rp, 0.0, 0.0, U, V)
    if not np.all(f2 < 0):
        verified = False
        notes.append("f2 >= 0 found above Theta(eta)")
    return StaticCaps(eta, v_cap, verified, notes)


def speed_caps(spec: ProblemSpec, N_T: float, A_sup: float):
    """Front-speed caps ``(left, right)`` from the comparison-function argument.

    ``right = 2 beta max{2/h0, sqrt(A N / 2d), -min_{[0,h0]} v0'}`` and the left
    cap uses ``mu`` and ``max_{[-h0,0]} v0'``.
    """
    h0, d = spec.h0, spec.d
    mid = math.sqrt(max(A_sup, 0.0) * N_T / (2.0 * d))
    min_r, max_l = spec.init.v0_slopes()
    right = 2.0 * spec.beta * max(2.0 / h0, mid, -min_r)
    left = 2.0 * spec.mu * max(2.0 / h0, mid, max_l)
    return left, right


def comparison_K(spec: ProblemSpec, N_T: float, A_sup: float):
    """Smallest admissible ``K`` per side meeting all three comparison constraints."""
    h0, d = spec.h0, spec.d
    mid = math.sqrt(max(A_sup, 0.0) / (2.0 * d * N_T))
    min_r, max_l = spec.init.v0_slopes()
    return (max(2.0 / h0, mid, max_l / N_T), max(2.0 / h0, mid, -min_r / N_T))


def sup_f2(rp: ReactionPair, umax: float, vmax: float, n: int = 65) -> float:
    U, V = np.meshgrid(np.linspace(0, umax, n), np.linspace(0, vmax, n), indexing="ij")
    return float(eval_reactions(rp, 0.0, 0.0, U, V)[1].max())


@dataclass
class BoundInputs:
    """Everything the audit needs: density caps as functions of time and speed caps."""

    theorem: str
    u_cap: Callable[[float], float]
    v_cap: Callable[[float], float]
    M_T: float
    N_T: float
    A_sup: float
    speed: tuple
    speed_comparison: tuple
    notes: list = field(default_factory=list)
    verified: bool = True


def bound_inputs(spec: ProblemSpec, horizon: Optional[float] = None) -> Optional[BoundInputs]:
    """Pick the applicable theorem and assemble the caps; ``None`` if neither applies."""
    T = spec.t_final if horizon is None else horizon
    rp = spec.reactions
    mu0, mv0 = float(spec.init.u0.max()), float(spec.init.v0.max())
    notes = []
    try:
        path = majorant_ode(rp, (mu0, mv0), T + 1.0)
        if path.blowup_time is not None:
            raise BoundsUnavailable(f"majorant blows up at t={path.blowup_time:.4g}")
        if not is_quasimonotone(rp, 1.05 * path.M, 1.05 * path.N):
            raise BoundsUnavailable("reactions are not quasimonotone on the majorant box")
        M_T, N_T = path.M, path.N
        A = sup_f2(rp, M_T, N_T)
        K = comparison_K(spec, N_T, A)
        return BoundInputs(
            "majorant", lambda t: float(path(t)[0]), lambda t: float(path(t)[1]),
            M_T, N_T, A, speed_caps(spec, N_T, A),
            (2 * spec.mu * N_T * K[0], 2 * spec.beta * N_T * K[1]), notes,
        )
    except BoundsUnavailable as exc:
        notes.append(f"majorant path unavailable: {exc}")
    try:
        sc = static_caps(rp, mu0, mv0)
    except BoundsUnavailable as exc:
        notes.append(str(exc))
        return None
    notes.extend(sc.notes)
    A = sup_f2(rp, sc.eta, sc.v_cap)
    K = comparison_K(spec, sc.v_cap, A)
    return BoundInputs(
        "threshold", lambda t: sc.eta, lambda t: sc.v_cap, sc.eta, sc.v_cap, A,
        speed_caps(spec, sc.v_cap, A),
        (2 * spec.mu * sc.v_cap * K[0], 2 * spec.beta * sc.v_cap * K[1]), notes, sc.verified,
    )


@dataclass
class BoundReport:
    theorem: str
    caps: dict
    speed_caps: tuple
    violations: list = field(default_factory=list)
    checked: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "caps": self.caps,
            "speed_caps": {"left": self.speed_caps[0], "right": self.speed_caps[1]},
            "violations": self.violations,
            "checked": self.checked,
            "notes": self.notes,
        }


def check_solution(traj: Trajectory, inputs: Optional[BoundInputs], slack: float = 0.05,
                   positivity_tol: float = 1e-12) -> BoundReport:
    """Audit a trajectory against density caps, speed caps, monotone fronts and positivity."""
    viol = []
    checked = {"density_points": 0, "front_rows": len(traj.front_rows)}

    def add(t, q, obs, cap):
        viol.append({"t": float(t), "quantity": q, "observed": float(obs), "cap": float(cap)})

    for s in traj.snapshots:
        checked["density_points"] += 2 * len(s.u)
        if s.u.min() < -positivity_tol:
            add(s.t, "u_positive", s.u.min(), 0.0)
        if s.v.min() < -positivity_tol:
            add(s.t, "v_positive", s.v.min(), 0.0)
        if inputs is not None:
            uc, vc = inputs.u_cap(s.t), inputs.v_cap(s.t)
            if s.u.max() > uc * (1 + slack):
                add(s.t, "u", s.u.max(), uc)
            if s.v.max() > vc * (1 + slack):
                add(s.t, "v", s.v.max(), vc)

    F = traj.fronts
    locked = bool(traj.meta.get("lock_fronts", False))
    if len(F) > 1 and not locked:
        dh, dg = np.diff(F[:, 2]), np.diff(F[:, 1])
        for k in np.flatnonzero(dh < 0):
            add(F[k + 1, 0], "h_monotone", dh[k], 0.0)
        for k in np.flatnonzero(dg > 0):
            add(F[k + 1, 0], "g_monotone", dg[k], 0.0)
        for row in F[2:]:
            if not row[4] > 0:
                add(row[0], "hdot_sign", row[4], 0.0)
            if not row[3] < 0:
                add(row[0], "gdot_sign", row[3], 0.0)
    if inputs is not None and not locked:
        left, right = inputs.speed
        for row in F:
            if row[4] > right * (1 + slack):
                add(row[0], "hdot", row[4], right)
            if -row[3] > left * (1 + slack):
                add(row[0], "-gdot", -row[3], left)

    if inputs is None:
        return BoundReport("none", {}, (math.inf, math.inf), viol, checked,
                           ["no a priori caps available"])
    caps = {"M_T": inputs.M_T, "N_T": inputs.N_T, "A_sup": inputs.A_sup,
            "speed_comparison_K": {"left": inputs.speed_comparison[0],
                                   "right": inputs.speed_comparison[1]},
            "verified": inputs.verified}
    return BoundReport(inputs.theorem, caps, inputs.speed, viol, checked, list(inputs.notes))
