"""Outer fixed-point iteration over time windows.

Given a guess for ``u`` on a window, one application of the map solves the
parabolic subproblem for ``(v, g, h)`` with ``u`` frozen, then transports
``u`` along characteristic lines of the resulting fronts. Windows are
chained to the horizon, re-basing the initial data at each window end.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bounds import BoundInputs, bound_inputs, check_solution
from .grid import FrontState, ReferenceGrid, map_to_physical
from .model import ProblemSpec, estimate_lipschitz, eval_reactions
from .parabolic import StepParams, WindowRejected, boundary_flux, front_velocities, solve_subproblem
from .trajectory import Trajectory
from .transport import LineBundle, rebuild_u_field, transport_window

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
MIN_WINDOW = 1e-6


class WindowUnderflow(RuntimeError):
    """Window adaptation shrank below the minimum length."""


class BoundViolation(RuntimeError):
    """Strict mode: the trajectory broke an a priori bound."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


@dataclass
class WindowStart:
    """State at the start of a window: fronts, ``v`` and the ``u`` lines."""

    fs: FrontState
    v: np.ndarray
    x_lines: np.ndarray
    u_lines: np.ndarray
    step_index: int = 0

    @classmethod
    def initial(cls, spec: ProblemSpec, n: int, sp: StepParams | None = None):
        y = np.linspace(-1.0, 1.0, n)
        h0 = spec.h0
        fs = FrontState(0.0, -h0, h0)
        x = map_to_physical(fs, y)
        v = spec.init.v0_at(x)
        u = spec.init.u0_at(x)
        v[0] = v[-1] = u[0] = u[-1] = 0.0
        if sp is not None and not sp.lock_fronts:
            gdot, hdot = front_velocities(boundary_flux(v, fs, sp), spec)
            fs = FrontState(0.0, -h0, h0, gdot, hdot)
        return cls(fs, v, x, u, 0)

    @property
    def t(self) -> float:
        return self.fs.t

    @property
    def u(self):
        """``u`` at the node images of the window-start fronts."""
        n = len(self.v)
        b = LineBundle.constant([self.fs.t], self.x_lines, self.u_lines)
        return rebuild_u_field(b, 0, self.fs, n, check_coverage=False)


@dataclass
class GammaIterate:
    u_path: LineBundle
    v_path: np.ndarray
    front_path: list
    sup_delta: float
    iteration: int
    clipped_v: float = 0.0
    clipped_u: float = 0.0
    hopf_violations: list = field(default_factory=list)

    @property
    def times(self):
        return np.array([fs.t for fs in self.front_path])

    def u_fields(self, check_coverage: bool = True):
        n = self.v_path.shape[1]
        return np.array([rebuild_u_field(self.u_path, k, fs, n, check_coverage)
                         for k, fs in enumerate(self.front_path)])


@dataclass
class WindowResult:
    converged: bool
    iterations: int
    contraction_factors: list
    final: GammaIterate
    sup_deltas: list
    status: str = "converged"
    front_proxies: list = field(default_factory=list)

    @property
    def median_factor(self) -> float:
        f = [c for c in self.contraction_factors if c is not None]
        return float(np.median(f)) if f else 0.0


def path_distance(a: LineBundle, b: LineBundle) -> float:
    """Sup over levels and the union of both line sets of ``|a - b|``."""
    sup = 0.0
    for k in range(len(a.times)):
        xa = a._level(k)[0]
        xb = b._level(k)[0]
        pts = np.concatenate([xa, xb])
        if pts.size == 0:
            continue
        sup = max(sup, float(np.max(np.abs(a.evaluate(k, pts) - b.evaluate(k, pts)))))
    return sup


def window_times(window, dt):
    t0, t1 = window
    nsteps = max(1, int(round((t1 - t0) / dt)))
    times = t0 + (t1 - t0) / nsteps * np.arange(nsteps + 1)
    times[-1] = t1
    return times


def constant_guess(start: WindowStart, window, sp: StepParams) -> LineBundle:
    """The window-initial ``u`` extended constantly in time."""
    return LineBundle.constant(window_times(window, sp.dt), start.x_lines, start.u_lines)


def gamma_map(u_guess: LineBundle, spec: ProblemSpec, window, sp: StepParams,
              start: WindowStart, iteration: int = 1) -> GammaIterate:
    """One application of the map: subproblem for ``(v, g, h)``, then transport of ``u``."""
    sub = solve_subproblem(u_guess.evaluate, spec, window, sp, (start.v, start.fs),
                           first_step_index=start.step_index)
    bundle = transport_window(spec.reactions, sub.fronts, sub.v_path, start.x_lines,
                              start.u_lines, lock_fronts=sp.lock_fronts)
    delta = path_distance(bundle, u_guess)
    return GammaIterate(bundle, sub.v_path, sub.fronts, delta, iteration, sub.clipped,
                        bundle.clipped, sub.hopf_violations)


def _front_proxy(prev: GammaIterate, cur: GammaIterate, u_diff: float):
    """``||g, h||_C1`` difference between two iterates relative to their input distance."""
    if u_diff <= 100 * EPS:
        return None
    a = np.array([[fs.g, fs.h, fs.gdot, fs.hdot] for fs in prev.front_path])
    b = np.array([[fs.g, fs.h, fs.gdot, fs.hdot] for fs in cur.front_path])
    return float(np.max(np.abs(a - b)) / u_diff)


def iterate_to_fixed_point(spec: ProblemSpec, window, sp: StepParams, tol_fp: float = 1e-10,
                           max_iter: int = 30, start: Optional[WindowStart] = None,
                           u_guess: Optional[LineBundle] = None, n: int = 201) -> WindowResult:
    """Apply the map until successive iterates differ by at most ``tol_fp``."""
    if start is None:
        start = WindowStart.initial(spec, n, sp)
    guess = constant_guess(start, window, sp) if u_guess is None else u_guess
    deltas, factors, proxies = [], [], []
    prev_it = None
    it = None
    for k in range(1, max_iter + 1):
        it = gamma_map(guess, spec, window, sp, start, k)
        deltas.append(it.sup_delta)
        if len(deltas) > 1:
            factors.append(it.sup_delta / deltas[-2] if deltas[-2] > 100 * EPS else None)
            proxies.append(_front_proxy(prev_it, it, deltas[-2]))
        log.debug("window %s iteration %d sup_delta=%.3e", window, k, it.sup_delta)
        if it.sup_delta <= tol_fp:
            return WindowResult(True, k, factors, it, deltas, "converged", proxies)
        prev_it, guess = it, it.u_path
    last = next((f for f in reversed(factors) if f is not None), None)
    status = "no-contraction" if last is None or last >= 1.0 else "slow"
    return WindowResult(False, max_iter, factors, it, deltas, status, proxies)


@dataclass
class WindowAttempt:
    length: float
    converged: bool
    iterations: int


def adapt_window(history, remainder: float = math.inf, fast_iters: int = 4,
                 grow: float = 1.5, min_window: float = MIN_WINDOW) -> float:
    """Next window length from the attempt history.

    Halve after a failure; grow by ``grow`` after two consecutive fast
    successes at the current length; clamp to ``[min_window, remainder]``.
    """
    if not history:
        raise ValueError("adapt_window needs at least one recorded attempt")
    last = history[-1]
    if not last.converged:
        new = 0.5 * last.length
        if new < min_window:
            raise WindowUnderflow(f"window length {new:.3g} below {min_window:g}")
    else:
        run = 0
        for a in reversed(history):
            if a.length != last.length or not a.converged or a.iterations > fast_iters:
                break
            run += 1
        new = grow * last.length if run >= 2 else last.length
    return min(max(new, min_window), remainder)


def continue_solution(spec: ProblemSpec, sp: StepParams, tol_fp: float = 1e-10, n: int = 201,
                      window: float = 0.05, max_iter: int = 30, stride: int = 10,
                      strict: bool = False, inputs: Optional[BoundInputs] = None,
                      max_window: Optional[float] = None) -> Trajectory:
    """Chain fixed-point windows from ``t = 0`` to ``spec.t_final``.

    ``window`` is the first window length; later lengths follow
    :func:`adapt_window`, capped at ``max_window`` when given.
    """
    cap = math.inf if max_window is None else max_window
    ReferenceGrid(n)
    start = WindowStart.initial(spec, n, sp)
    traj = Trajectory("fixedpoint", n, meta={"windows": [], "lock_fronts": sp.lock_fronts})
    traj.add_front(start.fs)
    traj.add_snapshot(start.fs, start.u, start.v)
    history: list[WindowAttempt] = []
    length = min(window, spec.t_final, cap)
    clipped_u = clipped_v = 0.0
    hopf = []
    t_end = spec.t_final
    step_index = 0
    last_snap_step = 0
    results = []
    while start.t < t_end - 1e-12 * max(1.0, t_end):
        remainder = t_end - start.t
        length = min(length, remainder)
        nsteps = max(1, int(round(length / sp.dt)))
        t1 = start.t + nsteps * sp.dt
        if t1 > t_end or t_end - t1 < 0.5 * sp.dt:
            t1 = t_end
        try:
            res = iterate_to_fixed_point(spec, (start.t, t1), sp, tol_fp, max_iter, start)
            ok = res.converged
        except WindowRejected as exc:
            log.warning("window [%g, %g] rejected: %s", start.t, t1, exc)
            res, ok = None, False
        history.append(WindowAttempt(t1 - start.t, ok, res.iterations if res else max_iter))
        if res is not None:
            traj.meta["windows"].append({
                "t0": start.t, "t1": t1, "converged": res.converged, "iterations": res.iterations,
                "status": res.status, "sup_deltas": res.sup_deltas,
                "contraction_factors": res.contraction_factors,
                "front_proxies": res.front_proxies,
            })
        if not ok:
            if nsteps == 1:
                raise WindowUnderflow(f"no contraction even for a single step at t={start.t}")
            length = max(adapt_window(history, remainder), sp.dt)
            continue
        it = res.final
        results.append(res)
        clipped_u += it.clipped_u
        clipped_v += it.clipped_v
        hopf.extend(it.hopf_violations)
        fields = it.u_fields()
        for k in range(1, len(it.front_path)):
            fs = it.front_path[k]
            traj.add_front(fs)
            gstep = step_index + k
            final = k == len(it.front_path) - 1 and fs.t >= t_end - 1e-12
            if gstep - last_snap_step >= stride or final:
                traj.add_snapshot(fs, fields[k], it.v_path[k])
                last_snap_step = gstep
        step_index += len(it.front_path) - 1
        # carry the active lines (not node images) so kinks in u are not smeared
        xs, us = it.u_path.interpolant(len(it.front_path) - 1)
        start = WindowStart(it.front_path[-1], it.v_path[-1].copy(), xs, us, step_index)
        if t_end - start.t > 0:
            length = min(adapt_window(history, t_end - start.t), cap)

    if traj.snapshots[-1].t < traj.front_rows[-1][0]:
        fs = traj.final_state()
        traj.add_snapshot(fs, start.u, start.v)
    traj.meta.update({"clipped_u": clipped_u, "clipped_v": clipped_v, "hopf_violations": hopf,
                      "tol_fp": tol_fp})
    if strict:
        report = check_solution(traj, inputs if inputs is not None else bound_inputs(spec))
        traj.meta["bound_report"] = report.to_dict()
        if report.violations:
            raise BoundViolation(f"{len(report.violations)} bound violations", traj)
    return traj


@dataclass
class LipschitzLedger:
    L0: float
    L1: float
    L1star: float
    sigma_est: float
    C1_est: float
    C2_est: float
    M: Optional[float]
    flags: list = field(default_factory=list)
    u_lipschitz: Optional[float] = None

    def to_dict(self):
        return {k: getattr(self, k) for k in
                ("L0", "L1", "L1star", "sigma_est", "C1_est", "C2_est", "M", "flags", "u_lipschitz")}


def ledger_M(L0, L1, L1star, sigma, C1, C2):
    """``2 (L0 + L1* + C1/sigma + C2 L1)``; ``None`` when ``sigma`` vanishes."""
    if not sigma > 0:
        return None
    return 2.0 * (L0 + L1star + C1 / sigma + C2 * L1)


def discrete_lipschitz(traj: Trajectory) -> float:
    """Largest adjacent difference quotient of ``u`` in ``x`` over all snapshots."""
    best = 0.0
    for s in traj.snapshots:
        x = s.x
        best = max(best, float(np.max(np.abs(np.diff(s.u)) / np.diff(x))))
    return best


def build_ledger(spec: ProblemSpec, traj: Trajectory, n_samples: int = 64) -> LipschitzLedger:
    """Assemble the Lipschitz ledger from a completed run."""
    rp = spec.reactions
    A = float(spec.init.u0.max()) + 1.0
    B = float(spec.init.v0.max()) + 1.0
    umax = max([A] + [float(s.u.max()) for s in traj.snapshots])
    vmax = max([B] + [float(s.v.max()) for s in traj.snapshots])
    reach = max(2.0 * spec.h0, float(np.max(np.abs(traj.fronts[:, 1:3]))))
    L1, L1star = estimate_lipschitz(rp, (max(1.0, spec.t_final), reach, umax, vmax), n_samples)

    F = traj.fronts
    flags = []
    speeds = np.minimum(np.abs(F[1:, 3]), np.abs(F[1:, 4])) if len(F) > 1 else np.empty(0)
    sigma = float(speeds.min()) if speeds.size else 0.0

    uo = max(float(s.u.max()) for s in traj.snapshots)
    vo = max(float(s.v.max()) for s in traj.snapshots)
    U, V = np.meshgrid(np.linspace(0, uo, 33), np.linspace(0, vo, 33), indexing="ij")
    C1 = 0.0
    for tt in np.linspace(0, max(spec.t_final, 0.0), 3):
        for xx in np.linspace(-reach, reach, 5):
            C1 = max(C1, float(np.max(np.abs(eval_reactions(rp, tt, xx, U, V)[0]))))
    C2 = 0.0
    for s in traj.snapshots:
        xi = 2.0 / (s.h - s.g)
        C2 = max(C2, float(np.max(np.abs(np.gradient(s.v, 2.0 / (len(s.v) - 1), edge_order=2)))) * xi)
    M = ledger_M(spec.init.L0, L1, L1star, sigma, C1, C2)
    if M is None:
        flags.append("sigma_est = 0: M unavailable")
    return LipschitzLedger(spec.init.L0, L1, L1star, sigma, C1, C2, M, flags,
                           discrete_lipschitz(traj))
