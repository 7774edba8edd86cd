"""LQR waypoint tracking for the kinematic bicycle model."""

from __future__ import annotations

import math

import numpy as np

from ..errors import StalePlanError
from .ego import ACCEL_MAX, ACCEL_MIN, DELTA_MAX, EgoState

# state cost diag (x, y, theta, v), control cost diag (delta, accel)
Q_DIAG = (1.0, 1.0, 2.0, 0.5)
R_DIAG = (4.0, 1.0)


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _reference_profile(waypoints, ego: EgoState, dt: float):
    """Ego-frame waypoints (x, y, t) -> world-frame (x, z, theta, v) per tick.

    Headings come from consecutive displacements, speeds from arc length
    over time; the profile is resampled at the control period dt.
    """
    wps = np.asarray(waypoints, dtype=np.float64).reshape(-1, 3)
    ahead = wps[wps[:, 0] > 1e-9]
    if ahead.shape[0] == 0:
        raise StalePlanError("all waypoints are behind the ego vehicle")
    # prepend the current pose as the t=0 reference knot
    knots = np.vstack([[0.0, 0.0, 0.0], ahead])
    c, s = math.cos(ego.theta), math.sin(ego.theta)
    world = np.empty_like(knots)
    world[:, 0] = ego.x + c * knots[:, 0] - s * knots[:, 1]
    world[:, 1] = ego.z + s * knots[:, 0] + c * knots[:, 1]
    world[:, 2] = knots[:, 2]

    t_end = world[-1, 2]
    n = max(int(round(t_end / dt)), 1)
    ts = np.arange(n + 1) * dt
    xs = np.interp(ts, world[:, 2], world[:, 0])
    zs = np.interp(ts, world[:, 2], world[:, 1])
    dx, dz = np.diff(xs), np.diff(zs)
    seg = np.hypot(dx, dz)
    theta = np.where(seg > 1e-9, np.arctan2(dz, dx), ego.theta)
    theta = np.concatenate([theta, theta[-1:]])
    v = seg / dt
    v = np.concatenate([v, v[-1:]])
    return np.stack([xs, zs, theta, v], axis=1)


def _linearized_dynamics(v_ref: float, theta_ref: float, L: float, dt: float):
    """Discrete A, B of the bicycle model about a straight reference."""
    c, s = math.cos(theta_ref), math.sin(theta_ref)
    A = np.eye(4)
    A[0, 2] = -v_ref * s * dt
    A[0, 3] = c * dt
    A[1, 2] = v_ref * c * dt
    A[1, 3] = s * dt
    B = np.zeros((4, 2))
    B[2, 0] = v_ref / L * dt
    B[3, 1] = dt
    return A, B


def lqr_control(waypoints, ego: EgoState, dt: float = 0.1,
                q_diag=Q_DIAG, r_diag=R_DIAG) -> list[tuple[float, float]]:
    """Finite-horizon LQR tracking of a waypoint plan.

    `waypoints` are ego-frame (x_forward, y_left, t_seconds). Returns one
    (steering, acceleration) pair per control period covering the plan,
    clamped to the actuation limits.
    """
    ref = _reference_profile(waypoints, ego, dt)
    horizon = ref.shape[0] - 1
    Q = np.diag(q_diag)
    R = np.diag(r_diag)

    # backward Riccati recursion along the reference
    P = Q.copy()
    gains = [None] * horizon
    for k in reversed(range(horizon)):
        A, B = _linearized_dynamics(max(ref[k, 3], 0.1), ref[k, 2],
                                    ego.wheelbase, dt)
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        gains[k] = K
        P = Q + A.T @ P @ (A - B @ K)

    # forward pass from the actual ego state
    state = np.array([ego.x, ego.z, ego.theta, ego.v])
    controls = []
    for k in range(horizon):
        err = state - ref[k]
        err[2] = _wrap(err[2])
        u = -gains[k] @ err
        delta = float(np.clip(u[0], -DELTA_MAX, DELTA_MAX))
        accel = float(np.clip(u[1], ACCEL_MIN, ACCEL_MAX))
        controls.append((delta, accel))
        A, B = _linearized_dynamics(max(ref[k, 3], 0.1), ref[k, 2],
                                    ego.wheelbase, dt)
        state = ref[k + 1] + A @ err + B @ np.array([delta, accel])
    return controls
