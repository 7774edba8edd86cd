from .collision import (
    BEVBox,
    boxes_overlap,
    detect_collision_bg,
    detect_collision_fg,
    points_in_box_3d,
)
from .control import lqr_control
from .ego import ACCEL_MAX, ACCEL_MIN, DELTA_MAX, EgoState, bicycle_step
from .engine import DONE_REASONS, Environment, StepResult
from .scenario import ActorSpec, CameraRigEntry, ScenarioConfig

__all__ = [
    "ACCEL_MAX",
    "ACCEL_MIN",
    "ActorSpec",
    "BEVBox",
    "CameraRigEntry",
    "DELTA_MAX",
    "DONE_REASONS",
    "EgoState",
    "Environment",
    "ScenarioConfig",
    "StepResult",
    "bicycle_step",
    "boxes_overlap",
    "detect_collision_bg",
    "detect_collision_fg",
    "lqr_control",
    "points_in_box_3d",
]
