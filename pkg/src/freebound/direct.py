"""Monolithic split-step solver used to cross-check the fixed-point scheme.

Each step: half an ODE step for ``u``, a full ``(v, g, h)`` step, then the
second ODE half step. ``u`` lives on fixed physical points (the initial node
images plus points added wherever the fronts advance); points covered during
a step enter with ``u = 0`` at the half step, so entry times are only
resolved to within ``dt``. ``u`` is interpolated onto the moving node images
for the ``v`` coupling and for output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .bounds import bound_inputs, check_solution
from .fixedpoint import BoundViolation, WindowStart
from .grid import FrontState, map_to_physical, sample_field
from .model import ProblemSpec
from .parabolic import StepInfo, StepParams, hopf_ok, robust_step
from .trajectory import Trajectory
from .transport import rk4_lines


@dataclass
class DirectState:
    fs: FrontState
    v: np.ndarray
    xp: np.ndarray
    up: np.ndarray
    clipped_u: float = 0.0
    clipped_v: float = 0.0

    @property
    def t(self):
        return self.fs.t

    @property
    def u(self):
        """``u`` at the node images of the current fronts."""
        return points_to_nodes(self.xp, self.up, self.fs, len(self.v))


def points_to_nodes(xp, up, fs: FrontState, n: int):
    x = map_to_physical(fs, np.linspace(-1.0, 1.0, n))
    out = np.zeros(n)
    inside = (x >= xp[0]) & (x <= xp[-1])
    out[inside] = PchipInterpolator(xp, up)(x[inside])
    out[0] = out[-1] = 0.0
    return out


def _clip(u):
    neg = u < 0
    mass = float(-u[neg].sum()) if neg.any() else 0.0
    return np.where(neg, 0.0, u), mass


def _fresh_points(a, b, spacing):
    if b == a:
        return np.empty(0)
    m = max(int(np.ceil(abs(b - a) / spacing - 1e-12)), 1)
    return a + np.arange(1, m + 1) / m * (b - a)


def direct_step(state: DirectState, spec: ProblemSpec, sp: StepParams, dt: float | None = None) -> DirectState:
    """Advance ``(u, v, g, h)`` by one split step."""
    dt = sp.dt if dt is None else dt
    rp = spec.reactions
    fs = state.fs
    n = len(state.v)
    t0, th, t1 = fs.t, fs.t + 0.5 * dt, fs.t + dt
    xp = state.xp
    m = xp.size

    v_old_at_p = sample_field(state.v, fs, xp)
    u_half = rk4_lines(rp, xp, state.up, np.full(m, t0), np.full(m, th),
                       lambda t, x: v_old_at_p)
    u_half, c1 = _clip(u_half)

    info = StepInfo()
    w = points_to_nodes(xp, u_half, fs, n)
    v_new, fs_new = robust_step(state.v, fs, w, spec, sp, dt, info)
    fs_new = FrontState(t1, fs_new.g, fs_new.h, fs_new.gdot, fs_new.hdot)

    spacing = (fs_new.h - fs_new.g) / (n - 1)
    right = _fresh_points(fs.h, fs_new.h, spacing)
    left = _fresh_points(fs.g, fs_new.g, spacing)[::-1]
    xp = np.concatenate([left, xp, right])
    u_mid = np.concatenate([np.zeros(left.size), u_half, np.zeros(right.size)])

    v_new_at_p = sample_field(v_new, fs_new, xp)
    u_new = rk4_lines(rp, xp, u_mid, np.full(xp.size, th), np.full(xp.size, t1),
                      lambda t, x: v_new_at_p)
    u_new, c2 = _clip(u_new)
    # the outermost points sit on the fronts
    u_new[0] = u_new[-1] = 0.0
    return DirectState(fs_new, v_new, xp, u_new, state.clipped_u + c1 + c2,
                       state.clipped_v + info.clipped)


def direct_run(spec: ProblemSpec, sp: StepParams, n: int = 201, stride: int = 10,
               strict: bool = False, inputs=None) -> Trajectory:
    """Time-march the split-step scheme to ``spec.t_final``."""
    start = WindowStart.initial(spec, n, sp)
    state = DirectState(start.fs, start.v.copy(), start.x_lines.copy(), start.u_lines.copy())
    traj = Trajectory("direct", n, meta={"lock_fronts": sp.lock_fronts})
    traj.add_front(state.fs)
    traj.add_snapshot(state.fs, state.u, state.v)
    nsteps = int(round(spec.t_final / sp.dt)) if spec.t_final > 0 else 0
    if nsteps == 0 and spec.t_final > 0:
        nsteps = 1
    dt = spec.t_final / nsteps if nsteps else sp.dt
    hopf = []
    for k in range(1, nsteps + 1):
        state = direct_step(state, spec, sp, dt)
        t = spec.t_final if k == nsteps else k * dt
        state.fs = FrontState(t, state.fs.g, state.fs.h, state.fs.gdot, state.fs.hdot)
        traj.add_front(state.fs)
        if not sp.lock_fronts and k >= 2 and not hopf_ok(state.fs):
            hopf.append(t)
        if k % stride == 0 or k == nsteps:
            traj.add_snapshot(state.fs, state.u, state.v)
    traj.meta.update({"clipped_u": state.clipped_u, "clipped_v": state.clipped_v,
                      "hopf_violations": hopf, "u_points": int(state.xp.size)})
    if strict:
        report = check_solution(traj, inputs if inputs is not None else bound_inputs(spec))
        traj.meta["bound_report"] = report.to_dict()
        if report.violations:
            raise BoundViolation(f"{len(report.violations)} bound violations", traj)
    return traj
