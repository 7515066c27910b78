"""Front-fixing geometry between ``[g(t), h(t)]`` and ``[-1, 1]``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator


class OutOfDomain(ValueError):
    """A physical abscissa lies outside ``[g, h]``."""


@dataclass(frozen=True)
class FrontState:
    t: float
    g: float
    h: float
    gdot: float = 0.0
    hdot: float = 0.0

    def __post_init__(self):
        if not self.g < self.h:
            raise ValueError(f"front state needs g < h, got g={self.g}, h={self.h}")

    @property
    def length(self) -> float:
        return self.h - self.g


class ReferenceGrid:
    """Uniform nodes on ``[-1, 1]``; ``n`` counts all nodes, endpoints included."""

    def __init__(self, n: int):
        if n < 5:
            raise ValueError(f"grid needs at least 5 nodes, got {n}")
        self.n = int(n)
        self.y = np.linspace(-1.0, 1.0, self.n)
        self.dy = 2.0 / (self.n - 1)

    def __repr__(self):
        return f"ReferenceGrid(n={self.n})"

    def refined(self, factor: int = 2) -> "ReferenceGrid":
        return ReferenceGrid(factor * (self.n - 1) + 1)


def map_to_physical(fs: FrontState, y):
    y = np.asarray(y, dtype=float)
    x = 0.5 * ((fs.h - fs.g) * y + fs.h + fs.g)
    # pin the endpoints so y = +-1 lands on the fronts bit-exactly
    x = np.where(y == -1.0, fs.g, np.where(y == 1.0, fs.h, x))
    return float(x) if x.ndim == 0 else x


def map_to_reference(fs: FrontState, x, strict: bool = True):
    """Inverse of :func:`map_to_physical`.

    With ``strict`` an abscissa outside ``[g, h]`` raises :class:`OutOfDomain`;
    otherwise the raw (possibly out-of-range) coordinate is returned.
    """
    x = np.asarray(x, dtype=float)
    y = (2.0 * x - fs.g - fs.h) / (fs.h - fs.g)
    if strict:
        tol = 1e-14 * max(1.0, abs(fs.g), abs(fs.h))
        if np.any(x < fs.g - tol) or np.any(x > fs.h + tol):
            raise OutOfDomain(f"x outside [g, h] = [{fs.g}, {fs.h}]")
        y = np.clip(y, -1.0, 1.0)
    return float(y) if y.ndim == 0 else y


def stretch_coeffs(fs: FrontState, y):
    """``(xi, zeta)`` of the transformed equation at reference coordinate ``y``.

    ``xi = 2/(h-g)``; ``zeta = ((h'+g') + (h'-g') y)/(h-g)``.
    """
    ell = fs.h - fs.g
    xi = 2.0 / ell
    zeta = ((fs.hdot + fs.gdot) + (fs.hdot - fs.gdot) * np.asarray(y, dtype=float)) / ell
    return xi, zeta


def sample_field(values, fs: FrontState, x):
    """Monotone cubic interpolation of a reference-grid field at physical ``x``.

    Zero outside ``[g, h]``.
    """
    values = np.asarray(values, dtype=float)
    y_nodes = np.linspace(-1.0, 1.0, values.size)
    x = np.asarray(x, dtype=float)
    y = np.asarray(map_to_reference(fs, x, strict=False))
    inside = (y >= -1.0) & (y <= 1.0)
    out = np.zeros_like(y)
    if np.any(inside):
        out[inside] = PchipInterpolator(y_nodes, values)(y[inside])
    return float(out) if out.ndim == 0 else out


def d_dy(z, dy):
    """Second-order derivative along a reference-grid field (one-sided at ends)."""
    return np.gradient(z, dy, edge_order=2)
