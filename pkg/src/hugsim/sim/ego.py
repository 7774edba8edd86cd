"""Ego vehicle state and kinematic bicycle integration."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ..errors import InvariantViolation

DELTA_MAX = 0.6          # rad
ACCEL_MIN = -6.0         # m/s^2
ACCEL_MAX = 3.0
EULER_SUBSTEPS = 5


@dataclass(frozen=True)
class EgoState:
    """BEV pose + speed of the ego vehicle.

    The BEV frame is the scene's (x, z) ground plane; theta is the heading
    angle in that plane, v the forward speed.
    """

    x: float
    z: float
    theta: float
    v: float
    wheelbase: float = 2.7
    length: float = 4.6
    width: float = 1.9

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise InvariantViolation(f"wheelbase {self.wheelbase} must be positive")
        if not math.isfinite(self.v):
            raise InvariantViolation("ego speed must be finite")

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.z, self.theta)


def bicycle_step(state: EgoState, delta: float, accel: float, dt: float,
                 substeps: int = EULER_SUBSTEPS,
                 delta_max: float = DELTA_MAX,
                 accel_min: float = ACCEL_MIN,
                 accel_max: float = ACCEL_MAX) -> EgoState:
    """Advance the kinematic bicycle model by dt with explicit Euler.

    d(x, z, theta, v)/dt = (v cos theta, v sin theta, v tan(delta)/L, accel),
    with steering and acceleration clamped to the actuation limits. The pose
    is integrated over `substeps` Euler steps at the step's initial speed
    (the substeps track heading curvature, not speed change); speed updates
    once at the end, so a vehicle at rest never moves within the step.
    """
    delta = min(max(delta, -delta_max), delta_max)
    accel = min(max(accel, accel_min), accel_max)
    x, z, th, v = state.x, state.z, state.theta, state.v
    h = dt / substeps
    tan_d = math.tan(delta)
    for _ in range(substeps):
        x += v * math.cos(th) * h
        z += v * math.sin(th) * h
        th += v * tan_d / state.wheelbase * h
    return replace(state, x=x, z=z, theta=th, v=v + accel * dt)
