"""Planar unicycle motion model: exact step, trajectories, interpolation.

States are (x, z, theta) in the ground plane with theta the yaw angle;
velocities are (v, omega) per inter-knot interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation

OMEGA_EPS = 1e-6


def unicycle_step(state, v: float, omega: float):
    """Advance (x, z, theta) by one unit interval of forward speed v, yaw rate omega.

    Uses the analytic straight-line limit when |omega| is tiny.
    """
    x, z, theta = float(state[0]), float(state[1]), float(state[2])
    theta_next = theta + omega
    if abs(omega) < OMEGA_EPS:
        x_next = x + v * np.cos(theta)
        z_next = z + v * np.sin(theta)
    else:
        x_next = x + (v / omega) * (np.sin(theta_next) - np.sin(theta))
        z_next = z - (v / omega) * (np.cos(theta_next) - np.cos(theta))
    return np.array([x_next, z_next, theta_next])


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)


@dataclass
class UnicycleTrajectory:
    """Knot states plus per-interval velocities.

    times: (T,) strictly increasing seconds; states: (T, 3) of (x, z, theta);
    velocities: (T-1, 2) of (v, omega) in m/s and rad/s.
    """

    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        self.states = np.asarray(self.states, dtype=np.float64).reshape(-1, 3)
        self.velocities = np.asarray(self.velocities, dtype=np.float64).reshape(-1, 2)
        if self.times.size != self.states.shape[0]:
            raise InvariantViolation("knot count mismatch between times and states")
        if self.velocities.shape[0] != self.times.size - 1:
            raise InvariantViolation("need exactly T-1 velocity intervals")
        if np.any(np.diff(self.times) <= 0):
            raise InvariantViolation("knot times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    def interpolate(self, t: float):
        """State at time t; returns (state, clamped).

        Mid-interval states follow the unicycle step from the left knot,
        with a linear correction so knots are reproduced exactly.
        Times outside the support clamp to the boundary knots.
        """
        if t <= self.times[0]:
            return self.states[0].copy(), t < self.times[0]
        if t >= self.times[-1]:
            return self.states[-1].copy(), t > self.times[-1]
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        dt = self.times[k + 1] - self.times[k]
        frac = (t - self.times[k]) / dt
        v, om = self.velocities[k]
        partial = unicycle_step(self.states[k], v * dt * frac, om * dt * frac)
        full = unicycle_step(self.states[k], v * dt, om * dt)
        resid = self.states[k + 1] - full
        resid[2] = wrap_angle(resid[2])
        return partial + frac * resid, False

    def pose_at(self, t: float):
        state, _ = self.interpolate(t)
        return state

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "states": self.states.tolist(),
            "velocities": self.velocities.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "UnicycleTrajectory":
        return UnicycleTrajectory(
            np.array(d["times"]), np.array(d["states"]), np.array(d["velocities"])
        )


def rollout(start, vs, omegas, times) -> UnicycleTrajectory:
    """Integrate a consistent trajectory from per-interval (v, omega) in SI units."""
    times = np.asarray(times, dtype=np.float64)
    states = [np.asarray(start, dtype=np.float64)]
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        states.append(unicycle_step(states[-1], vs[k] * dt, omegas[k] * dt))
    vel = np.stack([np.asarray(vs, dtype=np.float64),
                    np.asarray(omegas, dtype=np.float64)], axis=1)
    return UnicycleTrajectory(times, np.stack(states), vel)
