"""Run record shared by both schemes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import FrontState, map_to_physical

SCHEMA_VERSION = 1


@dataclass
class Snapshot:
    t: float
    g: float
    h: float
    u: np.ndarray
    v: np.ndarray

    @property
    def y(self):
        return np.linspace(-1.0, 1.0, len(self.u))

    @property
    def x(self):
        return map_to_physical(FrontState(self.t, self.g, self.h), self.y)


@dataclass
class Trajectory:
    scheme: str
    n: int
    front_rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def add_front(self, fs: FrontState):
        if self.front_rows and fs.t <= self.front_rows[-1][0]:
            raise ValueError("trajectory times must be strictly increasing")
        self.front_rows.append((fs.t, fs.g, fs.h, fs.gdot, fs.hdot))

    def add_snapshot(self, fs: FrontState, u, v):
        self.snapshots.append(Snapshot(fs.t, fs.g, fs.h, np.array(u, float), np.array(v, float)))

    @property
    def fronts(self) -> np.ndarray:
        """Array of rows ``(t, g, h, gdot, hdot)``."""
        return np.array(self.front_rows, dtype=float).reshape(-1, 5)

    @property
    def t(self):
        return self.fronts[:, 0]

    @property
    def g(self):
        return self.fronts[:, 1]

    @property
    def h(self):
        return self.fronts[:, 2]

    @property
    def gdot(self):
        return self.fronts[:, 3]

    @property
    def hdot(self):
        return self.fronts[:, 4]

    def final_state(self) -> FrontState:
        t, g, h, gd, hd = self.front_rows[-1]
        return FrontState(t, g, h, gd, hd)

    def snapshot_at(self, t: float, tol: float = 1e-12) -> Snapshot:
        for s in self.snapshots:
            if abs(s.t - t) <= tol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t={t}")
