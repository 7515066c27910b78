"""Diffusing species and free boundaries in front-fixed coordinates.

On the reference interval the diffusing density ``z(t, y) = v(t, x(t, y))``
obeys ``z_t = d xi^2 z_yy + zeta z_y + f2`` with ``z(t, +-1) = 0``, and the
fronts move with ``g' = -mu v_x(g)``, ``h' = -beta v_x(h)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .grid import FrontState, ReferenceGrid, map_to_physical
from .model import ProblemSpec, ReactionPair, eval_reactions

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    """A single time step could not be completed at the requested size."""


class WindowRejected(RuntimeError):
    """Repeated step halving fell below the minimum step size."""


class HopfSignWarning(RuntimeWarning):
    """A front moved inward (``h' <= 0`` or ``g' >= 0``) after the first step."""


@dataclass(frozen=True)
class FieldPair:
    t: float
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class StepParams:
    dt: float
    theta: float = 1.0
    flux_order: int = 2
    lock_fronts: bool = False
    reaction_damping: bool = False
    min_dt: float = 1e-12

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0.5, 1], got {self.theta}")
        if self.flux_order not in (1, 2):
            raise ValueError(f"flux_order must be 1 or 2, got {self.flux_order}")


def boundary_flux(v, fs: FrontState, sp: StepParams):
    """Physical one-sided gradients ``(v_x(g), v_x(h))``."""
    z = np.asarray(v, dtype=float)
    dy = 2.0 / (z.size - 1)
    if sp.flux_order == 1:
        zl = (z[1] - z[0]) / dy
        zr = (z[-1] - z[-2]) / dy
    else:
        zl = (-3.0 * z[0] + 4.0 * z[1] - z[2]) / (2.0 * dy)
        zr = (3.0 * z[-1] - 4.0 * z[-2] + z[-3]) / (2.0 * dy)
    xi = 2.0 / (fs.h - fs.g)
    return xi * zl, xi * zr


def front_velocities(flux, spec: ProblemSpec):
    vx_l, vx_r = flux
    return -spec.mu * vx_l, -spec.beta * vx_r


def advance_fronts(fs: FrontState, flux, spec: ProblemSpec, dt: float, flux_new=None) -> FrontState:
    """Explicit front update.

    With only ``flux`` this is the predictor (forward Euler). Passing
    ``flux_new`` gives the corrector, which moves the fronts with the average
    of the old and new velocities.
    """
    gdot, hdot = front_velocities(flux, spec)
    if flux_new is None:
        return FrontState(fs.t + dt, fs.g + dt * gdot, fs.h + dt * hdot, gdot, hdot)
    gdot1, hdot1 = front_velocities(flux_new, spec)
    g = fs.g + 0.5 * dt * (gdot + gdot1)
    h = fs.h + 0.5 * dt * (hdot + hdot1)
    return FrontState(fs.t + dt, g, h, gdot1, hdot1)


def v_step(fields: FieldPair, fs_old: FrontState, fs_new: FrontState, u_frozen,
           rp: ReactionPair, sp: StepParams, d: float, dt: float | None = None):
    """One theta-weighted step of the transformed ``v`` equation.

    The advection coefficient uses the discrete mesh velocity implied by the
    two front states, so node trajectories and ``zeta`` agree. The reaction is
    evaluated at the old level (optionally with a linearised damping term).

    Returns ``(v_new, clipped_mass)``.
    """
    dt = sp.dt if dt is None else dt
    z = np.asarray(fields.v, dtype=float)
    n = z.size
    dy = 2.0 / (n - 1)
    y = np.linspace(-1.0, 1.0, n)
    theta = sp.theta

    gv = (fs_new.g - fs_old.g) / dt
    hv = (fs_new.h - fs_old.h) / dt
    ell0 = fs_old.h - fs_old.g
    ell1 = fs_new.h - fs_new.g

    def coeffs(ell):
        diff = d * (2.0 / ell) ** 2 / dy**2
        adv = ((hv + gv) + (hv - gv) * y[1:-1]) / ell / (2.0 * dy)
        return diff, adv

    x_old = map_to_physical(fs_old, y)
    f2 = eval_reactions(rp, fields.t, x_old, u_frozen, np.maximum(z, 0.0))[1]

    rhs = z.copy()
    zi = z[1:-1]
    if theta < 1.0:
        diff0, adv0 = coeffs(ell0)
        Lz = diff0 * (z[2:] - 2 * zi + z[:-2]) + adv0 * (z[2:] - z[:-2])
        rhs[1:-1] += (1.0 - theta) * dt * Lz
    rhs[1:-1] += dt * f2[1:-1]

    diff1, adv1 = coeffs(ell1)
    ab = np.zeros((3, n))
    ab[1, :] = 1.0
    ab[1, 1:-1] = 1.0 + 2.0 * theta * dt * diff1
    ab[0, 2:] = -theta * dt * (diff1 + adv1)    # super-diagonal, row j -> col j+1
    ab[2, :-2] = -theta * dt * (diff1 - adv1)   # sub-diagonal, row j -> col j-1

    if sp.reaction_damping:
        eps = 1e-7 * max(1.0, float(np.max(np.abs(z))))
        f2p = eval_reactions(rp, fields.t, x_old, u_frozen, np.maximum(z, 0.0) + eps)[1]
        damp = np.minimum((f2p - f2) / eps, 0.0)[1:-1]
        ab[1, 1:-1] -= dt * damp
        rhs[1:-1] -= dt * damp * zi

    rhs[0] = rhs[-1] = 0.0
    try:
        znew = solve_banded((1, 1), ab, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise StepFailure(f"tridiagonal solve failed: {exc}") from exc
    if not np.all(np.isfinite(znew)):
        raise StepFailure("non-finite v after step")
    znew[0] = znew[-1] = 0.0
    neg = znew < 0
    clipped = float(-znew[neg].sum() * dy * ell1 / 2.0) if neg.any() else 0.0
    znew[neg] = 0.0
    return znew, clipped


@dataclass
class StepInfo:
    clipped: float = 0.0
    substeps: int = 1


def coupled_step(v, fs: FrontState, u_frozen, spec: ProblemSpec, sp: StepParams, dt: float):
    """Advance ``(v, g, h)`` by ``dt`` with predictor-corrector front coupling."""
    fields = FieldPair(fs.t, u_frozen, v)
    if sp.lock_fronts:
        fs_new = FrontState(fs.t + dt, fs.g, fs.h, 0.0, 0.0)
        vnew, clip = v_step(fields, fs, fs_new, u_frozen, spec.reactions, sp, spec.d, dt)
        return vnew, fs_new, clip

    flux0 = boundary_flux(v, fs, sp)
    fs_pred = advance_fronts(fs, flux0, spec, dt)
    if not fs_pred.g < fs_pred.h:
        raise StepFailure("fronts crossed in predictor")
    vpred, _ = v_step(fields, fs, fs_pred, u_frozen, spec.reactions, sp, spec.d, dt)
    flux1 = boundary_flux(vpred, fs_pred, sp)
    fs_corr = advance_fronts(fs, flux0, spec, dt, flux_new=flux1)
    vnew, clip = v_step(fields, fs, fs_corr, u_frozen, spec.reactions, sp, spec.d, dt)
    gdot, hdot = front_velocities(boundary_flux(vnew, fs_corr, sp), spec)
    return vnew, FrontState(fs_corr.t, fs_corr.g, fs_corr.h, gdot, hdot), clip


def robust_step(v, fs: FrontState, u_frozen, spec: ProblemSpec, sp: StepParams, dt: float,
                info: StepInfo | None = None):
    """:func:`coupled_step` with recursive halving on failure."""
    info = info if info is not None else StepInfo()
    try:
        vnew, fsnew, clip = coupled_step(v, fs, u_frozen, spec, sp, dt)
        info.clipped += clip
        return vnew, fsnew
    except (StepFailure, ValueError) as exc:
        half = 0.5 * dt
        if half < sp.min_dt:
            raise WindowRejected(f"step size underflow at t={fs.t}: {exc}") from exc
        log.debug("halving step at t=%g to %g (%s)", fs.t, half, exc)
        info.substeps += 1
        vmid, fsmid = robust_step(v, fs, u_frozen, spec, sp, half, info)
        return robust_step(vmid, fsmid, u_frozen, spec, sp, half, info)


def hopf_ok(fs: FrontState) -> bool:
    return fs.hdot > 0 and fs.gdot < 0


@dataclass
class SubproblemResult:
    times: np.ndarray
    v_path: np.ndarray
    fronts: list
    clipped: float = 0.0
    hopf_violations: list = field(default_factory=list)
    monotone: list = field(default_factory=list)


def solve_subproblem(u_path: Callable[[int, np.ndarray], np.ndarray], spec: ProblemSpec,
                     window, sp: StepParams, init, first_step_index: int = 0) -> SubproblemResult:
    """March ``(v, g, h)`` over ``window`` with ``u`` frozen.

    ``u_path(k, x)`` returns ``u`` at time level ``k`` of the window and
    physical abscissae ``x``. ``init`` is ``(v_start, front_state)``.
    ``first_step_index`` is the global index of the window's first step;
    Hopf signs are only audited from global step 1 on.
    """
    t0, t1 = window
    v, fs = init
    nsteps = max(1, int(round((t1 - t0) / sp.dt)))
    dt = (t1 - t0) / nsteps
    n = len(v)
    y = np.linspace(-1.0, 1.0, n)
    times = t0 + dt * np.arange(nsteps + 1)
    times[-1] = t1
    v_path = np.empty((nsteps + 1, n))
    v_path[0] = v
    fronts = [fs]
    res = SubproblemResult(times, v_path, fronts)
    info = StepInfo()
    for k in range(nsteps):
        w = u_path(k, map_to_physical(fs, y))
        v, fs_new = robust_step(v, fs, w, spec, sp, times[k + 1] - times[k], info)
        fs_new = FrontState(times[k + 1], fs_new.g, fs_new.h, fs_new.gdot, fs_new.hdot)
        res.monotone.append(fs_new.h >= fs.h and fs_new.g <= fs.g)
        if not sp.lock_fronts and first_step_index + k >= 1 and not hopf_ok(fs_new):
            res.hopf_violations.append(fs_new.t)
            warnings.warn(f"Hopf sign violated at t={fs_new.t:.6g}", HopfSignWarning, stacklevel=2)
        fs = fs_new
        v_path[k + 1] = v
        fronts.append(fs)
    res.clipped = info.clipped
    return res
