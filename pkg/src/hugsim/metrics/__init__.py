from .hd import (
    ScoreTrace,
    comfort_score,
    drivable_compliance,
    hd_score,
    hd_score_step,
    point_in_polygon,
    route_completion,
    score_report,
    time_to_collision_score,
    write_score_report,
)
from .recon import chamfer_semantic, depth_rmse, pose_error, psnr, ssim

__all__ = [
    "ScoreTrace",
    "chamfer_semantic",
    "comfort_score",
    "depth_rmse",
    "drivable_compliance",
    "hd_score",
    "hd_score_step",
    "point_in_polygon",
    "pose_error",
    "psnr",
    "route_completion",
    "score_report",
    "ssim",
    "time_to_collision_score",
    "write_score_report",
]
