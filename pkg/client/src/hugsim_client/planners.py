"""Planner interface and two reference planners."""

from __future__ import annotations

import math

import numpy as np


class PlannerAdapter:
    """Maps an observation + ego state to ego-frame waypoints [x, y, t]."""

    def plan(self, observation, ego):
        raise NotImplementedError


class ConstantHeadingPlanner(PlannerAdapter):
    """Keep the current heading at a target speed."""

    def __init__(self, speed: float = 5.0, horizon: float = 2.0, n: int = 4):
        self.speed = speed
        self.horizon = horizon
        self.n = n

    def plan(self, observation, ego):
        ts = [self.horizon * (k + 1) / self.n for k in range(self.n)]
        return [[self.speed * t, 0.0, t] for t in ts]


class RouteFollowerPlanner(PlannerAdapter):
    """Project a world-frame BEV route into the ego frame and track it."""

    def __init__(self, route, speed: float = 5.0, horizon: float = 2.0, n: int = 4):
        self.route = np.asarray(route, dtype=np.float64).reshape(-1, 2)
        self.speed = speed
        self.horizon = horizon
        self.n = n
        seg = np.diff(self.route, axis=0)
        self._seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self._cum = np.concatenate([[0.0], np.cumsum(self._seg_len)])

    def _arc_position(self, p) -> float:
        """Route arc length of the closest point to p."""
        seg = np.diff(self.route, axis=0)
        rel = p - self.route[:-1]
        denom = np.maximum(self._seg_len ** 2, 1e-12)
        u = np.clip((rel * seg).sum(axis=1) / denom, 0.0, 1.0)
        proj = self.route[:-1] + u[:, None] * seg
        d = np.hypot(*(p - proj).T)
        i = int(np.argmin(d))
        return float(self._cum[i] + u[i] * self._seg_len[i])

    def _point_at_arc(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), float(self._cum[-1]))
        i = int(np.clip(np.searchsorted(self._cum, s, side="right") - 1,
                        0, len(self._seg_len) - 1))
        u = (s - self._cum[i]) / max(self._seg_len[i], 1e-12)
        return self.route[i] + u * (self.route[i + 1] - self.route[i])

    def plan(self, observation, ego):
        x, z, theta, _v = ego
        s0 = self._arc_position(np.array([x, z]))
        c, s = math.cos(theta), math.sin(theta)
        wps = []
        for k in range(self.n):
            t = self.horizon * (k + 1) / self.n
            target = self._point_at_arc(s0 + self.speed * t)
            dx, dz = target[0] - x, target[1] - z
            # world -> ego frame (x forward, y left)
            wps.append([c * dx + s * dz, -s * dx + c * dz, t])
        return wps
