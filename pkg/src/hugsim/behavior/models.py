"""Replay, constant-speed, and IDM car-following behaviors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..unicycle import UnicycleTrajectory


@dataclass(frozen=True)
class ActorState:
    """BEV kinematic state of a traffic actor."""

    x: float
    z: float
    theta: float
    v: float

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.z, self.theta)


def replay_behavior(traj: UnicycleTrajectory, t: float):
    """Pose from a recorded trajectory; (pose, clamped) with clamped=True
    when t falls outside the recording."""
    t0, t1 = traj.times[0], traj.times[-1]
    clamped = t < t0 or t > t1
    tc = min(max(t, t0), t1)
    state, _ = traj.interpolate(tc)
    if len(traj.velocities):
        k = int(np.clip(np.searchsorted(traj.times, tc, side="right") - 1,
                        0, len(traj.velocities) - 1))
        v = float(traj.velocities[k, 0])
    else:
        v = 0.0
    return ActorState(float(state[0]), float(state[1]), float(state[2]), v), clamped


def constant_speed_behavior(start_pose, speed: float, t: float) -> ActorState:
    """Straight-line advance along the start heading."""
    x0, z0, th = float(start_pose[0]), float(start_pose[1]), float(start_pose[2])
    d = speed * t
    return ActorState(x0 + d * math.cos(th), z0 + d * math.sin(th), th, speed)


@dataclass(frozen=True)
class IDMParams:
    v0: float = 10.0        # desired speed m/s
    a_max: float = 2.0      # max accel
    b: float = 3.0          # comfortable decel
    s0: float = 2.0         # jam distance m
    t_headway: float = 1.5  # s
    a_min: float = -6.0     # emergency decel


def idm_acceleration(v: float, gap: float | None, lead_v: float | None,
                     params: IDMParams = IDMParams()) -> float:
    """Intelligent-driver-model longitudinal acceleration.

    gap is bumper-to-bumper distance to the leader (None = free road).
    """
    free = params.a_max * (1.0 - (max(v, 0.0) / params.v0) ** 4)
    if gap is None:
        return free
    if gap <= 0.0:
        return params.a_min
    dv = v - (lead_v or 0.0)
    s_star = params.s0 + max(v * params.t_headway
                             + v * dv / (2.0 * math.sqrt(params.a_max * params.b)), 0.0)
    a = params.a_max * (1.0 - (max(v, 0.0) / params.v0) ** 4 - (s_star / gap) ** 2)
    return max(a, params.a_min)


def pure_pursuit_heading_rate(state: ActorState, lane_point, lookahead: float = 5.0) -> float:
    """Yaw rate steering the actor toward a lane reference point."""
    dx = lane_point[0] - state.x
    dz = lane_point[1] - state.z
    alpha = math.atan2(dz, dx) - state.theta
    alpha = (alpha + math.pi) % (2 * math.pi) - math.pi
    return 2.0 * state.v * math.sin(alpha) / max(lookahead, 1e-6)


def predict_trajectory(state: ActorState, horizon: float, dt: float) -> np.ndarray:
    """Constant-velocity, constant-heading rollout: rows (x, z, theta, v)."""
    n = int(round(horizon / dt))
    ts = np.arange(1, n + 1) * dt
    xs = state.x + state.v * np.cos(state.theta) * ts
    zs = state.z + state.v * np.sin(state.theta) * ts
    return np.stack([xs, zs, np.full(n, state.theta), np.full(n, state.v)], axis=1)
