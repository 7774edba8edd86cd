from .attack import (
    AggressivePlanner,
    AttackConfig,
    CandidateTrajectory,
    attack_select,
    candidate_cost,
    spline_candidates,
)
from .models import (
    ActorState,
    IDMParams,
    constant_speed_behavior,
    idm_acceleration,
    predict_trajectory,
    pure_pursuit_heading_rate,
    replay_behavior,
)

__all__ = [
    "ActorState",
    "AggressivePlanner",
    "AttackConfig",
    "CandidateTrajectory",
    "IDMParams",
    "attack_select",
    "candidate_cost",
    "constant_speed_behavior",
    "idm_acceleration",
    "predict_trajectory",
    "pure_pursuit_heading_rate",
    "replay_behavior",
    "spline_candidates",
]
