"""Scene and trajectory fitting."""

from .config import FitConfig
from .gradcheck import gradient_check
from .losses import (GroundPatchSampler, LossWeights, loss_alpha, loss_ground,
                     loss_image, loss_semantic, loss_smooth, loss_track,
                     loss_unicycle, ssim, unicycle_predict)
from .optimize import FitFrame, optimize_scene, write_log
from .unicycle_fit import (fit_unicycle, noisy_boxes, trajectory_errors,
                           velocities_from_states)

__all__ = [
    "FitConfig", "FitFrame", "GroundPatchSampler", "LossWeights",
    "fit_unicycle", "gradient_check", "loss_alpha", "loss_ground",
    "loss_image", "loss_semantic", "loss_smooth", "loss_track",
    "loss_unicycle", "noisy_boxes", "optimize_scene", "ssim",
    "trajectory_errors", "unicycle_predict", "velocities_from_states",
    "write_log",
]
